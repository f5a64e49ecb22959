#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace choreo::io {

// All artifact file formats share one layout: a line-oriented text header
// (space-separated fields, first line "CHOREO-<KIND> v1"), optionally followed
// by a single "blob <count>" line and <count> raw little-endian float64s.
// The header stays diffable with ordinary text tools.

struct Line {
    std::vector<std::string> fields;
    const std::string& key() const { return fields.front(); }
    // field accessors throw DataError with the line's key on bad shape/parse
    const std::string& str(std::size_t i) const;
    double num(std::size_t i) const;
    long integer(std::size_t i) const;
    std::size_t size() const { return fields.size(); }
};

class Header {
public:
    // Reads header lines up to and including an optional "blob" line; the
    // stream is left positioned at the first blob byte.
    static Header parse(std::istream& in, const std::string& magic);

    const std::vector<Line>& lines() const { return lines_; }
    bool has_blob() const { return has_blob_; }
    std::size_t blob_count() const { return blob_count_; }

    // first line with the given key, or nullptr
    const Line* find(const std::string& key) const;
    std::vector<const Line*> all(const std::string& key) const;

private:
    std::vector<Line> lines_;
    bool has_blob_ = false;
    std::size_t blob_count_ = 0;
};

void write_blob(std::ostream& out, std::span<const double> values);
std::vector<double> read_blob(std::istream& in, std::size_t count);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace choreo::io
