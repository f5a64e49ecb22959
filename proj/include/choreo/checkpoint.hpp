#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "choreo/params.hpp"

namespace choreo::nn {

// Single-file checkpoint: text manifest (meta key/value lines plus a
// name/shape/offset table, tensors packed in lexicographic name order)
// followed by one raw little-endian float64 blob. Layout:
//
//   CHOREO-CKPT v1
//   meta <key> <value>
//   tensor <name> <offset> <rank> <dims...>
//   blob <total-f64-count>
//   <raw bytes>
//
// Offsets are element (not byte) offsets into the blob.
struct Checkpoint {
    ParamSet params;
    std::map<std::string, std::string> meta;

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);

    const std::string& meta_at(const std::string& key) const;
    double meta_num(const std::string& key) const;
};

// FNV-1a over a file's bytes; used by output manifests to pin inputs.
std::string file_hash_hex(const std::filesystem::path& path);

}  // namespace choreo::nn
