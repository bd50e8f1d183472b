#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kinlab/common.hpp"
#include "kinlab/experiments.hpp"

namespace ex = kinlab::experiments;

namespace {

enum Exit { kPass = 0, kCriterionFail = 1, kUsage = 2, kRuntime = 3 };

std::string utc_now() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// "--key value" and "--key=value" pairs left over after the fixed options
std::vector<std::pair<std::string, std::string>> split_overrides(const std::vector<std::string>& rest) {
    std::vector<std::pair<std::string, std::string>> out;
    for (std::size_t i = 0; i < rest.size(); ++i) {
        const std::string& a = rest[i];
        if (a.rfind("--", 0) != 0 || a.size() < 3) throw CLI::ExtrasError({a});
        auto eq = a.find('=');
        if (eq != std::string::npos) {
            out.emplace_back(a.substr(2, eq - 2), a.substr(eq + 1));
        } else {
            if (i + 1 >= rest.size()) throw CLI::ArgumentMismatch("option " + a + " needs a value");
            out.emplace_back(a.substr(2), rest[++i]);
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    if (!args.empty() && args[0] == "run") args.erase(args.begin());

    CLI::App app{"kinlab: seeded experiment driver"};
    app.allow_extras();
    app.set_version_flag("--version", ex::version());
    std::string experiment, config_path, out_dir;
    std::uint64_t seed = 0;
    bool list = false;
    app.add_option("experiment", experiment, "experiment id");
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "master seed");
    app.add_option("--out", out_dir, "output directory (default runs/<experiment>-seed<N>)");
    app.add_flag("--list", list, "print experiment ids and their default parameters");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kPass : kUsage;
    }

    if (list) {
        for (const auto& id : ex::experiment_ids()) std::cout << id << " " << ex::default_params(id).dump() << "\n";
        return kPass;
    }

    ex::Config cfg;
    try {
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            cfg = ex::parse_config(ex::json::parse(f));
            if (!experiment.empty() && experiment != cfg.experiment)
                throw kinlab::Error("experiment '" + experiment + "' does not match config '" + cfg.experiment + "'");
        } else {
            if (experiment.empty()) throw kinlab::Error("missing experiment id (see --list)");
            cfg = ex::default_config(experiment);
        }
        if (seed_opt->count()) cfg.seed = seed;
        for (const auto& [k, v] : split_overrides(app.remaining())) ex::apply_override(cfg, k, v);
        ex::validate(cfg);
    } catch (const std::exception& e) {
        std::cerr << "kinlab: " << e.what() << "\n";
        return kUsage;
    }
    if (out_dir.empty()) out_dir = "runs/" + cfg.experiment + "-seed" + std::to_string(cfg.seed);

    try {
        std::string started = utc_now();
        auto t0 = std::chrono::steady_clock::now();
        auto res = ex::run(cfg, out_dir);
        double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        auto files = ex::write_run(cfg, res, out_dir, wall, started);
        std::cout << ex::summary_text(cfg, res);
        std::cout << "manifest " << files.manifest << "\n";
        return res.pass() ? kPass : kCriterionFail;
    } catch (const std::exception& e) {
        std::cerr << "kinlab: " << e.what() << "\n";
        return kRuntime;
    }
}
