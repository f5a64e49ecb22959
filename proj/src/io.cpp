#include "choreo/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "choreo/common.hpp"

namespace choreo::io {

static_assert(std::endian::native == std::endian::little,
              "blob format is little-endian; big-endian hosts need byte swaps");

const std::string& Line::str(std::size_t i) const {
    if (i >= fields.size())
        throw DataError("line '" + key() + "': missing field " + std::to_string(i));
    return fields[i];
}

double Line::num(std::size_t i) const {
    const std::string& s = str(i);
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size())
        throw DataError("line '" + key() + "': bad number '" + s + "'");
    return v;
}

long Line::integer(std::size_t i) const {
    const std::string& s = str(i);
    char* end = nullptr;
    long v = std::strtol(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size())
        throw DataError("line '" + key() + "': bad integer '" + s + "'");
    return v;
}

Header Header::parse(std::istream& in, const std::string& magic) {
    std::string line;
    if (!std::getline(in, line) || line != magic + " v1")
        throw DataError("expected header '" + magic + " v1', got '" + line + "'");
    Header h;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        Line parsed;
        std::istringstream ls(line);
        std::string field;
        while (ls >> field) parsed.fields.push_back(field);
        if (parsed.fields.empty()) continue;
        if (parsed.key() == "blob") {
            h.has_blob_ = true;
            h.blob_count_ = static_cast<std::size_t>(parsed.integer(1));
            break;  // raw bytes follow immediately
        }
        h.lines_.push_back(std::move(parsed));
    }
    return h;
}

const Line* Header::find(const std::string& key) const {
    for (const auto& l : lines_)
        if (l.key() == key) return &l;
    return nullptr;
}

std::vector<const Line*> Header::all(const std::string& key) const {
    std::vector<const Line*> out;
    for (const auto& l : lines_)
        if (l.key() == key) out.push_back(&l);
    return out;
}

void write_blob(std::ostream& out, std::span<const double> values) {
    out << "blob " << values.size() << "\n";
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
}

std::vector<double> read_blob(std::istream& in, std::size_t count) {
    std::vector<double> values(count);
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != count * sizeof(double))
        throw DataError("blob truncated: expected " + std::to_string(count * sizeof(double)) +
                        " bytes, got " + std::to_string(in.gcount()));
    return values;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << contents;
    if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace choreo::io
