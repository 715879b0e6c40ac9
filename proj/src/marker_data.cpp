#include "subid/marker_data.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace subid {

int MarkerMatrix::n_plates() const {
  int m = 0;
  for (const Band& b : bands) m = std::max(m, b.plate + 1);
  return m;
}

int MarkerMatrix::find_band(int plate, int marker_length) const {
  for (int j = 0; j < n_bands(); ++j)
    if (bands[j].plate == plate && bands[j].marker_length == marker_length) return j;
  return -1;
}

void MarkerMatrix::validate() const {
  std::set<std::pair<int, int>> seen;
  for (const Band& b : bands) {
    SUBID_REQUIRE(b.marker_length > 0, "marker lengths must be positive");
    SUBID_REQUIRE(seen.insert({b.plate, b.marker_length}).second,
                  "duplicate (plate, marker length) band");
  }
  SUBID_REQUIRE(static_cast<int>(presence.size()) == n_taxa(),
                "presence row count must match taxa");
  for (const auto& row : presence) {
    SUBID_REQUIRE(static_cast<int>(row.size()) == n_bands(),
                  "presence row width must match bands");
    for (int v : row) SUBID_REQUIRE(v == 0 || v == 1, "presence entries must be 0/1");
  }
  for (int j = 0; j < n_bands(); ++j) {
    bool any = false;
    for (int i = 0; i < n_taxa(); ++i) any = any || presence[i][j] == 1;
    SUBID_REQUIRE(any, "every band must be present in at least one taxon");
  }
}

bool MarkerMatrix::operator==(const MarkerMatrix& other) const {
  if (taxon_names != other.taxon_names) return false;
  if (bands.size() != other.bands.size()) return false;
  // Compare as band sets keyed by (plate, length).
  for (int j = 0; j < n_bands(); ++j) {
    const int k = other.find_band(bands[j].plate, bands[j].marker_length);
    if (k < 0) return false;
    for (int i = 0; i < n_taxa(); ++i)
      if (presence[i][j] != other.presence[i][k]) return false;
  }
  return true;
}

MarkerMatrix derive_observed(const LocusAssignment& y) {
  MarkerMatrix x;
  x.taxon_names = y.taxon_names;
  const int t = y.n_taxa();
  std::set<std::pair<int, int>> band_keys;  // (plate, marker length)
  for (const auto& locus : y.loci) {
    SUBID_REQUIRE(static_cast<int>(locus.entries.size()) == t,
                  "locus entry count must match taxa");
    for (const auto& e : locus.entries)
      if (e.value == 1) band_keys.insert({locus.plate, e.n + kMarkerLengthOffset});
  }
  for (const auto& [plate, len] : band_keys) x.bands.push_back({len, plate});
  x.presence.assign(t, std::vector<int>(x.n_bands(), 0));
  for (const auto& locus : y.loci)
    for (int i = 0; i < t; ++i)
      if (locus.entries[i].value == 1) {
        const int j = x.find_band(locus.plate, locus.entries[i].n + kMarkerLengthOffset);
        x.presence[i][j] = 1;
      }
  return x;
}

bool is_consistent(const LocusAssignment& y, const MarkerMatrix& x) {
  if (y.taxon_names != x.taxon_names) return false;
  return derive_observed(y) == x;
}

namespace {

std::vector<std::string> split_tsv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, '\t')) out.push_back(field);
  return out;
}

int parse_int(const std::string& s, int line_no, const char* what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw io_error("line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
  }
}

}  // namespace

MarkerMatrix load_marker_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open marker file: " + path);
  std::string line;
  int line_no = 0;
  SUBID_CHECK(static_cast<bool>(std::getline(in, line)), "");
  ++line_no;
  const std::vector<std::string> header = split_tsv(line);
  if (header.size() < 3 || header[0] != "marker_length" || header[1] != "plate_id")
    throw io_error("line 1: header must start with marker_length, plate_id, taxa...");
  MarkerMatrix x;
  x.taxon_names.assign(header.begin() + 2, header.end());
  x.presence.assign(x.n_taxa(), {});
  std::set<std::pair<int, int>> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_tsv(line);
    if (fields.size() != header.size())
      throw io_error("line " + std::to_string(line_no) + ": expected " +
                     std::to_string(header.size()) + " fields, got " +
                     std::to_string(fields.size()));
    MarkerMatrix::Band band;
    band.marker_length = parse_int(fields[0], line_no, "marker length");
    band.plate = parse_int(fields[1], line_no, "plate id");
    if (band.marker_length <= 0)
      throw io_error("line " + std::to_string(line_no) + ": marker length must be positive");
    if (!seen.insert({band.plate, band.marker_length}).second)
      throw io_error("line " + std::to_string(line_no) + ": duplicate (plate, length) band");
    x.bands.push_back(band);
    for (int i = 0; i < x.n_taxa(); ++i) {
      const int v = parse_int(fields[2 + i], line_no, "presence entry");
      if (v != 0 && v != 1)
        throw io_error("line " + std::to_string(line_no) + ": presence entry must be 0 or 1");
      x.presence[i].push_back(v);
    }
  }
  try {
    x.validate();
  } catch (const std::invalid_argument& e) {
    throw io_error(std::string("marker file invalid: ") + e.what());
  }
  return x;
}

void write_marker_matrix(const MarkerMatrix& x, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write marker file: " + path);
  out << "marker_length\tplate_id";
  for (const auto& name : x.taxon_names) out << '\t' << name;
  out << '\n';
  for (int j = 0; j < x.n_bands(); ++j) {
    out << x.bands[j].marker_length << '\t' << x.bands[j].plate;
    for (int i = 0; i < x.n_taxa(); ++i) out << '\t' << x.presence[i][j];
    out << '\n';
  }
}

LocusAssignment load_assignment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open assignment file: " + path);
  std::string line;
  int line_no = 1;
  SUBID_CHECK(static_cast<bool>(std::getline(in, line)), "");
  const std::vector<std::string> header = split_tsv(line);
  if (header.size() != 5 || header[0] != "locus" || header[1] != "plate_id" ||
      header[2] != "taxon" || header[3] != "value" || header[4] != "marker_length")
    throw io_error("line 1: assignment header must be locus, plate_id, taxon, value, "
                   "marker_length");
  LocusAssignment y;
  std::map<std::string, int> taxon_idx;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> f = split_tsv(line);
    if (f.size() != 5)
      throw io_error("line " + std::to_string(line_no) + ": expected 5 fields");
    const int locus = parse_int(f[0], line_no, "locus index");
    const int plate = parse_int(f[1], line_no, "plate id");
    if (!taxon_idx.count(f[2])) {
      taxon_idx[f[2]] = static_cast<int>(y.taxon_names.size());
      y.taxon_names.push_back(f[2]);
    }
    const int taxon = taxon_idx[f[2]];
    const int value = parse_int(f[3], line_no, "value");
    if (value != 1 && value != 0 && value != -1)
      throw io_error("line " + std::to_string(line_no) + ": value must be 1, 0 or -1");
    while (y.n_loci() <= locus) y.loci.push_back({plate, {}});
    auto& entries = y.loci[locus].entries;
    y.loci[locus].plate = plate;
    while (static_cast<int>(entries.size()) <= taxon) entries.push_back({});
    if (value == -1) {
      entries[taxon] = {-1, 0};
    } else {
      const int marker_length = parse_int(f[4], line_no, "marker length");
      if (marker_length <= kMarkerLengthOffset)
        throw io_error("line " + std::to_string(line_no) + ": marker length must exceed " +
                       std::to_string(kMarkerLengthOffset));
      entries[taxon] = {value, marker_length - kMarkerLengthOffset};
    }
  }
  for (auto& locus : y.loci)
    while (static_cast<int>(locus.entries.size()) < y.n_taxa()) locus.entries.push_back({});
  return y;
}

void write_assignment(const LocusAssignment& y, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write assignment file: " + path);
  out << "locus\tplate_id\ttaxon\tvalue\tmarker_length\n";
  for (int k = 0; k < y.n_loci(); ++k)
    for (int i = 0; i < y.n_taxa(); ++i) {
      const auto& e = y.loci[k].entries[i];
      out << k << '\t' << y.loci[k].plate << '\t' << y.taxon_names[i] << '\t' << e.value
          << '\t';
      if (e.value == -1)
        out << "-";
      else
        out << e.n + kMarkerLengthOffset;
      out << '\n';
    }
}

}  // namespace subid
