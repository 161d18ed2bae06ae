// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <string>

namespace marppg {

/// Shortest round-trippable decimal form of a double ("%.17g" pruned), so
/// equal runs produce byte-identical CSV output.
std::string format_g17(double v);

/// Line-oriented CSV writer. Unless `deterministic`, the file opens with a
/// `# generated <utc timestamp>` comment line.
class CsvWriter {
public:
    CsvWriter(const std::string& path, bool deterministic);
    void comment(const std::string& text);
    void row(const std::string& line);
    void raw(const std::string& text);

private:
    std::ofstream out_;
};

} // namespace marppg
