#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "morseuq/inferpost.hpp"
#include "morseuq/probdmt.hpp"
#include "morseuq/synth.hpp"

namespace morseuq {

// A corpus directory holds case_<k>/{image,likelihood,gt}.grd; gt is
// optional. Cases load in ascending k.
void write_case(const std::filesystem::path& dir, const SynthCase& c);
Case load_case(const std::filesystem::path& dir);
std::vector<Case> load_corpus(const std::filesystem::path& dir);
std::string case_dir_name(int k);

// JSON Lines records.
std::string structure_record(const Structure& s);
std::string sample_record(const SampledSkeleton& s, int run_index);
std::string estimate_record(const StructureEstimate& e, const Structure& s);

struct EstimateRecord {
  StructureEstimate estimate;
  std::vector<Coord> path;  // deterministic path of the structure
};
std::vector<EstimateRecord> read_estimates(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace morseuq
