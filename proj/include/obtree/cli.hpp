#pragma once

#include "obtree/backend.hpp"
#include "obtree/predict.hpp"
#include "obtree/profiler.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace obtree::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kDataError = 2,
    kBackendMismatch = 3,
};

struct RunConfig {
    std::string model_path;
    std::string data_path;
    std::string out_path;  // empty: stdout
    Backend backend = Backend::scalar();
    int workers = 1;
    int block_size = 128;
    OutputTransform transform = OutputTransform::RawValue;
    bool profile = false;
    int repeat = 5;
    std::uint64_t seed = 0;
    profiling::ReportFormat report = profiling::ReportFormat::Table;

    /// Throws std::invalid_argument naming the bad field.
    void validate() const;
    /// One "# key=value ..." line capturing every field.
    std::string header(const std::string& command) const;
};

/// Runs one subcommand. `args` excludes the program name. Data output goes
/// to `out` unless --out names a file; diagnostics and reports go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace obtree::cli
