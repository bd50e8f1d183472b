// Acceptance gate: runs every experiment with its default configuration and
// prints one PASS/FAIL line per acceptance criterion. Run directories go to
// $KINLAB_ACCEPTANCE_OUT (default ./acceptance_runs).

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <map>
#include <string>

#include "kinlab/experiments.hpp"

namespace ex = kinlab::experiments;

namespace {

std::string utc_now() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

int main() {
    const char* env = std::getenv("KINLAB_ACCEPTANCE_OUT");
    const std::string root = env ? env : "acceptance_runs";
    const std::uint64_t seed = 1;

    std::map<int, std::vector<ex::Check>> by_criterion;
    std::map<int, std::string> errors;
    for (const auto& id : ex::experiment_ids()) {
        auto cfg = ex::default_config(id, seed);
        const std::string out = root + "/" + id;
        std::cout << "running " << id << " (config " << cfg.hash() << ")" << std::endl;
        try {
            auto started = utc_now();
            auto t0 = std::chrono::steady_clock::now();
            auto res = ex::run(cfg, out);
            double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            ex::write_run(cfg, res, out, wall, started);
            for (const auto& c : res.checks) {
                std::cout << "  " << (c.pass ? "pass " : "FAIL ") << c.id << ": " << c.detail << "\n";
                if (c.acceptance > 0) by_criterion[c.acceptance].push_back(c);
            }
            std::printf("  %s finished in %.1f s\n", id.c_str(), wall);
        } catch (const std::exception& e) {
            std::cout << "  ERROR " << id << ": " << e.what() << "\n";
            errors[0] += id + ": " + e.what() + "; ";
        }
        std::cout.flush();
    }

    std::cout << "\n";
    int failed = 0;
    for (int n = 1; n <= 10; ++n) {
        const auto& checks = by_criterion[n];
        bool pass = !checks.empty() && errors.empty();
        std::string why;
        for (const auto& c : checks)
            if (!c.pass) {
                pass = false;
                why += (why.empty() ? "" : "; ") + c.id + " (" + c.detail + ")";
            }
        if (checks.empty()) why = "no checks ran";
        failed += !pass;
        std::cout << "CRITERION " << n << ": " << (pass ? "PASS" : "FAIL");
        if (!pass) std::cout << "  " << why;
        std::cout << "\n";
    }
    if (!errors.empty()) std::cout << "errors: " << errors[0] << "\n";
    std::cout << (failed ? "ACCEPTANCE FAIL " : "ACCEPTANCE PASS ") << (10 - failed) << "/10 criteria\n";
    return failed ? 1 : 0;
}
