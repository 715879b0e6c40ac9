#pragma once

#include <string>
#include <vector>

#include "subid/marker_data.hpp"
#include "subid/model.hpp"

namespace subid {

// One amplifiable fragment found in a genome scan.
struct DigestFragment {
  std::size_t start = 0;        // offset of the left recognition site
  int intermediate_length = 0;  // N: bases between the selective triplets
  int marker_length = 0;        // N + 39
};

// Per-sequence digestion summary.
struct DigestReport {
  struct Row {
    std::string name;
    int fragment_count = 0;         // amplifiable, N inside the visibility window
    int observed_marker_count = 0;  // distinct marker lengths
    int superposition_count = 0;    // marker lengths produced by >= 2 fragments
    std::vector<int> marker_lengths;  // sorted, one per fragment
  };
  std::vector<Row> rows;
  double expected_count = 0.0;  // from expected_fragment_count, when requested
};

struct DigestOutput {
  DigestReport report;
  MarkerMatrix markers;
};

// Scans one sequence for fragments flanked by MseI/EcoRI or EcoRI/EcoRI sites
// whose selective bases match; fragments between two MseI sites are invisible.
// Only fragments with N in [n_min, n_max] are reported.
std::vector<DigestFragment> digest_sequence(const std::string& seq,
                                            const EnzymeScheme& scheme,
                                            const std::string& selective_eco,
                                            const std::string& selective_mse,
                                            int n_min = 11, int n_max = 586);

// Digests one sequence per taxon and assembles the observable marker matrix
// (bands are distinct marker lengths present in at least one taxon).
DigestOutput digest(const std::vector<std::string>& names,
                    const std::vector<std::string>& sequences,
                    const EnzymeScheme& scheme, const std::string& selective_eco,
                    const std::string& selective_mse, int n_min = 11, int n_max = 586);

// Expected number of amplified, in-window fragments for a genome of the given
// size: G * 17/4^6 * 33/289 * 1/4^6 * 0.864.
double expected_fragment_count(double genome_size);

// Multi-record FASTA reader; rejects empty records and non-ACGT characters.
void load_fasta(const std::string& path, std::vector<std::string>& names,
                std::vector<std::string>& sequences);

std::string random_genome(std::size_t length, Rng& rng);

void write_digest_report(const DigestReport& report, const std::string& path);

}  // namespace subid
