#include "skewfb/cli/cli.hpp"

#include "commands.hpp"
#include "skewfb/errors.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <openssl/evp.h>
#include <openssl/opensslv.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>

namespace skewfb::cli {

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

namespace {

namespace fs = std::filesystem;

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Json versions() {
    return {{"skewfb", kVersion},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"cli11", CLI11_VERSION},
            {"openssl", OPENSSL_VERSION_TEXT},
            {"compiler", __VERSION__}};
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << content;
    os.close();
    if (!os) throw ConfigError("cannot write " + path.string());
}

fs::path default_out(const std::string& command) {
    const char* root = std::getenv(kOutRootEnv);
    return fs::path(root && *root ? root : "runs") / command;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Reflected forward-backward SDE toolkit", "skewfb"};
    std::string command, config_path, out_dir;
    Overrides o;
    std::uint64_t seed = 0;
    std::size_t paths = 0;
    double dt = 0.0, tol = 0.0;
    unsigned threads = 0;
    app.add_option("command", command, "Subcommand")->required()->check(CLI::IsMember(command_names()));
    app.add_option("--config", config_path, "JSON config with a matching 'kind'")->required();
    app.add_option("--out", out_dir, std::string("Output directory (default $") + kOutRootEnv + "/<command>)");
    auto* seed_opt = app.add_option("--seed", seed, "Master seed");
    auto* paths_opt = app.add_option("--paths", paths, "Monte Carlo path count")->check(CLI::PositiveNumber);
    auto* dt_opt = app.add_option("--dt", dt, "Time step")->check(CLI::PositiveNumber);
    auto* tol_opt = app.add_option("--tol", tol, "Solver tolerance")->check(CLI::PositiveNumber);
    auto* threads_opt = app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    app.set_version_flag("--version", kVersion);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::Success&) {
        // --help / --version
        out << (app.get_option("--version")->count() ? std::string(kVersion) + "\n" : app.help());
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kConfig;
    }
    if (seed_opt->count()) o.seed = seed;
    if (paths_opt->count()) o.paths = paths;
    if (dt_opt->count()) o.dt = dt;
    if (tol_opt->count()) o.tol = tol;
    if (threads_opt->count()) o.threads = threads;

    try {
        std::ifstream is(config_path, std::ios::binary);
        if (!is) throw ConfigError("cannot read " + config_path);
        const std::string raw((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
        Json cfg;
        try {
            cfg = Json::parse(raw);
        } catch (const Json::parse_error& e) {
            throw ConfigError(std::string("invalid JSON: ") + e.what());
        }
        if (!cfg.is_object() || !cfg.contains("kind") || cfg.at("kind") != command) {
            throw ConfigError("config 'kind' must be \"" + command + "\"");
        }

        const fs::path dir = out_dir.empty() ? default_out(command) : fs::path(out_dir);
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory " + dir.string());

        CommandOutput result;
        try {
            result = run_command(command, cfg, o);
        } catch (const Json::exception& e) {
            throw ConfigError(e.what());
        }

        Json files = Json::array();
        for (const Artifact& a : result.artifacts) {
            write_file(dir / a.name, a.content);
            files.push_back({{"file", a.name}, {"sha256", sha256_hex(a.content)}, {"bytes", a.content.size()}});
        }
        Json manifest;
        manifest["command"] = command;
        manifest["config"] = config_path;
        manifest["config_sha256"] = sha256_hex(raw);
        manifest["seed"] = result.seed ? Json(*result.seed) : Json(nullptr);
        Json ov = Json::object();
        if (o.seed) ov["seed"] = *o.seed;
        if (o.paths) ov["paths"] = *o.paths;
        if (o.dt) ov["dt"] = *o.dt;
        if (o.tol) ov["tol"] = *o.tol;
        if (o.threads) ov["threads"] = *o.threads;
        manifest["overrides"] = ov;
        manifest["versions"] = versions();
        manifest["created_utc"] = utc_now();
        manifest["artifacts"] = files;
        manifest["status"] = result.violations.empty() ? "ok" : "invariant_violation";
        manifest["violations"] = result.violations;
        write_file(dir / "manifest.json", manifest.dump(2) + "\n");

        out << command << ": wrote " << result.artifacts.size() << " artifacts to " << dir.string() << "\n";
        if (!result.violations.empty()) {
            for (const auto& v : result.violations) err << "invariant violation: " << v << "\n";
            return kInvariant;
        }
        return kOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        switch (e.category()) {
            case ErrorCategory::config: return kConfig;
            case ErrorCategory::numerical: return kNumerical;
            case ErrorCategory::invariant: return kInvariant;
        }
        return kNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }
}

}  // namespace skewfb::cli
