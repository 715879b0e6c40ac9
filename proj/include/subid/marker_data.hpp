#pragma once

#include <map>
#include <string>
#include <vector>

#include "subid/common.hpp"
#include "subid/model.hpp"

namespace subid {

// Observed AFLP presence/absence data.  Bands are identified by
// (plate, marker length); marker lengths are the measured N + 39 values.
struct MarkerMatrix {
  struct Band {
    int marker_length = 0;
    int plate = 0;
  };

  std::vector<Band> bands;
  std::vector<std::string> taxon_names;
  std::vector<std::vector<int>> presence;  // [taxon][band] in {0,1}

  int n_taxa() const { return static_cast<int>(taxon_names.size()); }
  int n_bands() const { return static_cast<int>(bands.size()); }
  int n_plates() const;
  int find_band(int plate, int marker_length) const;  // -1 if absent
  void validate() const;

  bool operator==(const MarkerMatrix& other) const;
};

// Latent locus-to-marker assignment: per locus and taxon an AFLP value in
// {1, 0, -1} plus a length.  Lengths are stored as intermediate-region N;
// the +39 marker offset is applied only at IO boundaries.  Entries with
// value -1 (killed lineage) carry no meaningful length.
struct LocusAssignment {
  struct Entry {
    int value = 0;   // 1 visible, 0 silent, -1 killed
    int n = 0;       // intermediate length; undefined when value == -1
  };
  struct Locus {
    int plate = 0;
    std::vector<Entry> entries;  // one per taxon
  };

  std::vector<Locus> loci;
  std::vector<std::string> taxon_names;

  int n_loci() const { return static_cast<int>(loci.size()); }
  int n_taxa() const { return static_cast<int>(taxon_names.size()); }
};

// Markers implied by an assignment: taxon i shows a band at marker length
// N + 39 wherever some locus has value 1; duplicate (taxon, length) pairs
// collapse (superposition).  Value 0 and -1 entries emit nothing.
MarkerMatrix derive_observed(const LocusAssignment& y);

// derive_observed(y) equals x band-for-band (band order ignored).
bool is_consistent(const LocusAssignment& y, const MarkerMatrix& x);

MarkerMatrix load_marker_matrix(const std::string& path);
void write_marker_matrix(const MarkerMatrix& x, const std::string& path);

// Ground-truth assignment sidecar (long-form TSV; lengths as marker lengths).
LocusAssignment load_assignment(const std::string& path);
void write_assignment(const LocusAssignment& y, const std::string& path);

}  // namespace subid
