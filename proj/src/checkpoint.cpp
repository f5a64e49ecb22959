#include "choreo/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "choreo/io.hpp"

namespace choreo::nn {

void Checkpoint::save(const std::filesystem::path& path) const {
    std::ostringstream out;
    out << "CHOREO-CKPT v1\n";
    for (const auto& [k, v] : meta) out << "meta " << k << " " << v << "\n";
    std::size_t offset = 0;
    std::vector<double> blob;
    for (const auto& [name, t] : params.tensors()) {
        out << "tensor " << name << " " << offset << " " << t.rank();
        for (int d : t.shape) out << " " << d;
        out << "\n";
        blob.insert(blob.end(), t.values.begin(), t.values.end());
        offset += t.numel();
    }
    io::write_blob(out, blob);
    io::write_file(path, out.str());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    io::Header h = io::Header::parse(in, "CHOREO-CKPT");
    Checkpoint ck;
    for (const io::Line* l : h.all("meta")) {
        std::string value = l->str(2);
        for (std::size_t i = 3; i < l->size(); ++i) value += " " + l->str(i);
        ck.meta[l->str(1)] = value;
    }
    struct Entry {
        std::string name;
        std::size_t offset;
        std::vector<int> shape;
    };
    std::vector<Entry> entries;
    for (const io::Line* l : h.all("tensor")) {
        Entry e;
        e.name = l->str(1);
        e.offset = static_cast<std::size_t>(l->integer(2));
        long rank = l->integer(3);
        for (long i = 0; i < rank; ++i) e.shape.push_back(static_cast<int>(l->integer(4 + i)));
        entries.push_back(std::move(e));
    }
    if (!h.has_blob()) throw DataError("checkpoint missing blob: " + path.string());
    std::vector<double> blob = io::read_blob(in, h.blob_count());
    for (auto& e : entries) {
        std::size_t n = shape_numel(e.shape);
        if (e.offset + n > blob.size())
            throw DataError("checkpoint tensor '" + e.name + "' overruns blob");
        Tensor& t = ck.params.create(e.name, e.shape);
        std::copy(blob.begin() + e.offset, blob.begin() + e.offset + n, t.values.begin());
        t.check_finite("checkpoint tensor '" + e.name + "'");
    }
    return ck;
}

const std::string& Checkpoint::meta_at(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw DataError("checkpoint missing meta key '" + key + "'");
    return it->second;
}

double Checkpoint::meta_num(const std::string& key) const {
    return std::strtod(meta_at(key).c_str(), nullptr);
}

std::string file_hash_hex(const std::filesystem::path& path) {
    std::string bytes = io::read_file(path);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace choreo::nn
