#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace mdopt {

// Shortest round-trip-safe text for a double; identical bytes for identical
// values on every run.
inline std::string format_double(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

using CsvRow = std::vector<std::string>;

struct CsvTable {
    CsvRow header;
    std::vector<CsvRow> rows;
};

inline void write_csv(std::ostream& os, const CsvTable& table) {
    auto put = [&os](const CsvRow& r) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) os << ',';
            os << r[i];
        }
        os << '\n';
    };
    put(table.header);
    for (const auto& r : table.rows) put(r);
}

// Run-length encoding of a boolean mask: the first value plus run lengths.
struct RunLengthMask {
    bool first = false;
    std::vector<std::uint64_t> runs;
    std::uint64_t size() const {
        std::uint64_t s = 0;
        for (auto r : runs) s += r;
        return s;
    }
};

template <class Mask>
RunLengthMask rle_encode(const Mask& mask) {
    RunLengthMask out;
    if (mask.empty()) return out;
    out.first = static_cast<bool>(mask[0]);
    bool current = out.first;
    std::uint64_t run = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (static_cast<bool>(mask[i]) == current) {
            ++run;
        } else {
            out.runs.push_back(run);
            current = !current;
            run = 1;
        }
    }
    out.runs.push_back(run);
    return out;
}

inline std::vector<std::uint8_t> rle_decode(const RunLengthMask& rle) {
    std::vector<std::uint8_t> mask;
    bool v = rle.first;
    for (auto r : rle.runs) {
        mask.insert(mask.end(), r, v ? 1 : 0);
        v = !v;
    }
    return mask;
}

}  // namespace mdopt
