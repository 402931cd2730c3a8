#pragma once

#include <string>
#include <vector>

namespace fieldloom {

// Minimal CSV support for the pipeline's tabular interfaces. Fields are
// comma-separated; quoting with '"' is honored on read, values written by the
// pipeline never need quoting.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int col(const std::string& name) const; // -1 if absent
    int col_required(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);

} // namespace fieldloom
