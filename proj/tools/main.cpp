#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "biharm/cli.hpp"

namespace {

bool write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
    return static_cast<bool>(out);
}

}  // namespace

int main(int argc, char** argv) {
    namespace cli = biharm::cli;

    CLI::App app{"Finite-difference checks for biharmonic Picone, eigenvalue, Hardy-Rellich and stability results"};
    std::string command;
    std::string config_path;
    std::string out_path;
    std::string csv_dir;
    bool no_timestamp = false;
    app.add_option("command", command, "Experiment to run")
        ->required()
        ->check(CLI::IsMember(cli::commands()));
    app.add_option("--config", config_path, "JSON configuration file")->required();
    app.add_option("--out", out_path, "Write the JSON report here instead of stdout");
    app.add_option("--csv-dir", csv_dir, "Directory for CSV field files");
    app.add_flag("--no-timestamp", no_timestamp, "Omit the timestamp from the report");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cli::exit_config;
    }

    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
        std::cerr << "biharm: cannot read config '" << config_path << "'\n";
        return cli::exit_config;
    }
    std::ostringstream text;
    text << in.rdbuf();

    cli::ExecuteOptions options;
    options.timestamp = !no_timestamp;
    options.csv = !csv_dir.empty();
    const cli::RunResult result = cli::run(text.str(), command, options);

    if (!result.message.empty()) std::cerr << "biharm: " << result.message << '\n';
    if (!result.report.empty()) {
        if (out_path.empty()) {
            std::cout << result.report;
        } else if (!write_file(out_path, result.report)) {
            std::cerr << "biharm: cannot write '" << out_path << "'\n";
            return cli::exit_internal;
        }
    }
    if (!result.csv.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(csv_dir, ec);
        for (const cli::CsvFile& f : result.csv) {
            if (!write_file(std::filesystem::path(csv_dir) / f.name, f.content)) {
                std::cerr << "biharm: cannot write '" << f.name << "' in '" << csv_dir << "'\n";
                return cli::exit_internal;
            }
        }
    }
    return result.exit_code;
}
