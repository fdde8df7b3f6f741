#pragma once
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "holonomy/errors.hpp"

namespace holonomy {

// Shortest exact decimal for a double: %.17g round-trips bit-identically, so
// identical configs produce identical files byte for byte.
inline std::string csv_num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// Minimal CSV emitter. Every file starts with one comment line recording the
// config hash and the angle-origin convention behind every number in it.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, std::uint64_t config_hash,
              const std::string& header) {
        f_.open(path);
        if (!f_) throw Error("cannot open output file: " + path.string());
        char hash[32];
        std::snprintf(hash, sizeof hash, "%016llx",
                      static_cast<unsigned long long>(config_hash));
        f_ << "# config_hash=" << hash << " angle_origin=max_q_ray\n" << header << "\n";
    }

    template <class... Fields>
    void row(const Fields&... fields) {
        bool first = true;
        (write_field(fields, first), ...);
        f_ << "\n";
    }

private:
    void sep(bool& first) {
        if (!first) f_ << ",";
        first = false;
    }
    void write_field(double x, bool& first) { sep(first), f_ << csv_num(x); }
    void write_field(int x, bool& first) { sep(first), f_ << x; }
    void write_field(const std::vector<double>& v, bool& first) {
        for (double x : v) write_field(x, first);
    }
    void write_field(const std::string& s, bool& first) { sep(first), f_ << s; }
    void write_field(const char* s, bool& first) { sep(first), f_ << s; }

    std::ofstream f_;
};

}  // namespace holonomy
