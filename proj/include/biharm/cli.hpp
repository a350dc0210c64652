#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "biharm/error.hpp"
#include "biharm/expr.hpp"
#include "json.hpp"

namespace biharm::cli {

using Json = nlohmann::ordered_json;

enum ExitCode : int {
    exit_ok = 0,
    exit_internal = 1,
    exit_check_failed = 2,
    exit_no_convergence = 3,
    exit_config = 4,
};

/// Any problem with the configuration document: JSON syntax, missing, unknown or invalid keys,
/// expression parse failures. Maps to exit code 4.
class ConfigError : public Error {
public:
    using Error::Error;
};

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> names = {"eig", "picone", "hardy", "stability", "morse", "monotonicity"};
    return names;
}

/// Validated configuration. `resolved` holds every key with defaults applied, in schema order;
/// `expressions` holds the parsed form of each expression-valued key.
struct RunConfig {
    std::string command;
    Json resolved;
    std::map<std::string, expr::Expr> expressions;
};

/// `command` comes from the command line; a "command" key in the document must agree with it.
/// Throws ConfigError.
[[nodiscard]] RunConfig parse_config(std::string_view text, std::string_view command);

struct CsvFile {
    std::string name;     // file name, e.g. "u1.csv"
    std::string content;  // header x,y,value then one row per lattice node
};

struct RunResult {
    int exit_code = exit_ok;
    std::string report;   // JSON document, empty on config errors
    std::string message;  // diagnostic for stderr, empty on success
    std::vector<CsvFile> csv;
};

struct ExecuteOptions {
    bool timestamp = true;
    bool csv = false;
};

/// Runs the command. Exit 2 when an asserted check fails or a mathematical precondition does not
/// hold, 3 on solver non-convergence. The report is deterministic given the config when
/// `timestamp` is false.
[[nodiscard]] RunResult execute(const RunConfig& config, const ExecuteOptions& options = {});

/// parse_config followed by execute, with config errors mapped to exit 4.
[[nodiscard]] RunResult run(std::string_view text, std::string_view command, const ExecuteOptions& options = {});

}  // namespace biharm::cli
