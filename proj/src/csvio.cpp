// SPDX-License-Identifier: Apache-2.0
#include "marppg/csvio.hpp"

#include <cstdio>
#include <ctime>

#include "marppg/errors.hpp"

namespace marppg {

std::string format_g17(double v) {
    char buf[40];
    // shortest representation that round-trips
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        double back;
        std::sscanf(buf, "%lf", &back);
        if (back == v) return buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path, bool deterministic) : out_(path, std::ios::trunc) {
    if (!out_) throw IoError("cannot open for writing: " + path);
    if (!deterministic) {
        const std::time_t now = std::time(nullptr);
        char stamp[32];
        std::tm tm_utc{};
        gmtime_r(&now, &tm_utc);
        std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
        out_ << "# generated " << stamp << "\n";
    }
}

void CsvWriter::comment(const std::string& text) { out_ << "# " << text << "\n"; }
void CsvWriter::row(const std::string& line) { out_ << line << "\n"; }
void CsvWriter::raw(const std::string& text) { out_ << text; }

} // namespace marppg
