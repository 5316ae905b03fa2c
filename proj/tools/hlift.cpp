// hlift: lift | check | validate | list-problems
//
//   hlift lift --config run.ini --out-dir out/
//   TOOL_LOG=debug hlift check --config sphere.ini --seed 7

#include "hlift/runner.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <ostream>
#include <streambuf>
#include <string>

namespace {

class NullBuffer final : public std::streambuf {
protected:
    int overflow(int c) override { return c; }
};

enum class LogLevel { Error, Info, Debug };

LogLevel log_level_from_env() {
    const char* v = std::getenv("TOOL_LOG");
    if (v == nullptr) return LogLevel::Info;
    const std::string s(v);
    if (s == "error") return LogLevel::Error;
    if (s == "debug") return LogLevel::Debug;
    return LogLevel::Info;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Path lifting through smooth maps with singularity diagnostics"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "run configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out-dir", out_dir, "directory for traces and reports");
        sub->add_option("--seed", seed, "overrides check.seed (check) or the sampling seed (validate)");
    };
    CLI::App* lift = app.add_subcommand("lift", "lift the configured target path");
    CLI::App* check = app.add_subcommand("check", "sample the sufficient conditions on the configured map");
    CLI::App* validate = app.add_subcommand("validate", "run the oracle identity suite on the configured problem");
    CLI::App* list = app.add_subcommand("list-problems", "list builtin maps and control systems");
    add_common(lift);
    add_common(check);
    add_common(validate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : hlift::exit_code::kSetup;
    }

    if (list->parsed()) {
        hlift::list_problems(std::cout);
        return 0;
    }

    const LogLevel level = log_level_from_env();
    NullBuffer null_buffer;
    std::ostream null_stream(&null_buffer);
    hlift::RunContext ctx;
    ctx.out_dir = out_dir;
    ctx.verbose = level == LogLevel::Debug;
    ctx.log = level == LogLevel::Error ? &null_stream : &std::cerr;

    try {
        if (lift->parsed()) return hlift::run_from_file(hlift::Subcommand::Lift, config_path, ctx, seed);
        if (check->parsed()) return hlift::run_from_file(hlift::Subcommand::Check, config_path, ctx, seed);
        if (validate->parsed()) {
            // Per-identity lines only at debug level; the verdict line always goes to stdout.
            hlift::RunContext vctx = ctx;
            if (level != LogLevel::Debug) vctx.log = &null_stream;
            return hlift::run_from_file(hlift::Subcommand::Validate, config_path, vctx, seed);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return hlift::exit_code::kSetup;
    }
    return hlift::exit_code::kSetup;
}
