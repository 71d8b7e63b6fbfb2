#pragma once

#include <filesystem>
#include <string>

#include "bgz/ensemble.hpp"

namespace bgz {

// Trained-model bundle, little-endian throughout:
//
//   magic     "BGZM1"                      5 bytes
//   version   u32 (= 1)
//   count     u32 number of sections
//   sections  { tag: u32 length + ASCII bytes, payload: u64 length + bytes }
//
// Sections, in this order: "spec", "standardizer", "pca_full" (optional),
// "pca_crop" (optional), "priors", then one "member" per ensemble member.
// Payloads are built from u32/i32/u64/f32/f64 scalars and length-prefixed
// f64 arrays; see bundle.cpp for the field order of each section.
inline constexpr char kBundleMagic[] = "BGZM1";
inline constexpr std::uint32_t kBundleVersion = 1;

std::string serialize_bundle(const EnsembleModel& model);
EnsembleModel deserialize_bundle(const std::string& bytes);

void save_bundle(const std::filesystem::path& path, const EnsembleModel& model);
EnsembleModel load_bundle(const std::filesystem::path& path);

// Human-readable description written next to the bundle as <path>.txt.
std::string bundle_summary(const EnsembleModel& model);

}  // namespace bgz
