#include "subid/digest.hpp"

#include <algorithm>
#include <fstream>
#include <map>

namespace subid {

namespace {

struct Site {
  std::size_t pos = 0;
  bool rare = false;  // true = EcoRI (6-base), false = MseI (4-base)
  std::size_t length() const { return rare ? 6 : 4; }
};

std::vector<Site> find_sites(const std::string& seq, const EnzymeScheme& scheme) {
  std::vector<Site> sites;
  const std::string& rare = scheme.rare_site;
  const std::string& freq = scheme.frequent_site;
  std::size_t pos = seq.find(rare);
  while (pos != std::string::npos) {
    sites.push_back({pos, true});
    pos = seq.find(rare, pos + 1);
  }
  pos = seq.find(freq);
  while (pos != std::string::npos) {
    sites.push_back({pos, false});
    pos = seq.find(freq, pos + 1);
  }
  std::sort(sites.begin(), sites.end(),
            [](const Site& a, const Site& b) { return a.pos < b.pos; });
  return sites;
}

}  // namespace

std::vector<DigestFragment> digest_sequence(const std::string& seq,
                                            const EnzymeScheme& scheme,
                                            const std::string& selective_eco,
                                            const std::string& selective_mse,
                                            int n_min, int n_max) {
  const int sel = scheme.selective_bases_per_primer;
  SUBID_REQUIRE(static_cast<int>(selective_eco.size()) == sel &&
                    static_cast<int>(selective_mse.size()) == sel,
                "selective base strings must have the primer length");
  for (char c : seq)
    if (c != 'A' && c != 'C' && c != 'G' && c != 'T')
      throw std::invalid_argument(std::string("non-ACGT character '") + c +
                                  "' in sequence");

  const std::vector<Site> sites = find_sites(seq, scheme);
  std::vector<DigestFragment> fragments;
  for (std::size_t i = 0; i + 1 < sites.size(); ++i) {
    const Site& left = sites[i];
    const Site& right = sites[i + 1];
    if (!left.rare && !right.rare) continue;  // MseI/MseI fragments are invisible
    const std::size_t inner_start = left.pos + left.length();
    if (right.pos < inner_start + 2 * sel) continue;  // no room for both triplets
    const int n = static_cast<int>(right.pos - inner_start) - 2 * sel;
    if (n < n_min || n > n_max) continue;
    const std::string left_sel = seq.substr(inner_start, sel);
    const std::string right_sel = seq.substr(right.pos - sel, sel);
    const std::string& want_left = left.rare ? selective_eco : selective_mse;
    const std::string& want_right = right.rare ? selective_eco : selective_mse;
    if (left_sel != want_left || right_sel != want_right) continue;
    fragments.push_back({left.pos, n, n + scheme.primer_overhead});
  }
  return fragments;
}

DigestOutput digest(const std::vector<std::string>& names,
                    const std::vector<std::string>& sequences,
                    const EnzymeScheme& scheme, const std::string& selective_eco,
                    const std::string& selective_mse, int n_min, int n_max) {
  SUBID_REQUIRE(names.size() == sequences.size(), "one name per sequence");
  DigestOutput out;
  std::map<int, std::vector<int>> presence_by_length;  // marker length -> taxa
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const auto fragments =
        digest_sequence(sequences[i], scheme, selective_eco, selective_mse, n_min, n_max);
    DigestReport::Row row;
    row.name = names[i];
    row.fragment_count = static_cast<int>(fragments.size());
    std::map<int, int> count_by_length;
    for (const auto& f : fragments) ++count_by_length[f.marker_length];
    for (const auto& [len, count] : count_by_length) {
      ++row.observed_marker_count;
      if (count >= 2) ++row.superposition_count;
      presence_by_length[len].push_back(static_cast<int>(i));
    }
    for (const auto& f : fragments) row.marker_lengths.push_back(f.marker_length);
    std::sort(row.marker_lengths.begin(), row.marker_lengths.end());
    out.report.rows.push_back(std::move(row));
  }
  out.markers.taxon_names = names;
  out.markers.presence.assign(names.size(), {});
  for (const auto& [len, taxa] : presence_by_length) {
    out.markers.bands.push_back({len, 0});
    for (auto& row : out.markers.presence) row.push_back(0);
    for (int t : taxa) out.markers.presence[t].back() = 1;
  }
  return out;
}

double expected_fragment_count(double genome_size) {
  SUBID_REQUIRE(genome_size > 0.0, "genome size must be positive");
  return genome_size * (17.0 / 4096.0) * (33.0 / 289.0) * (1.0 / 4096.0) * 0.864;
}

void load_fasta(const std::string& path, std::vector<std::string>& names,
                std::vector<std::string>& sequences) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open FASTA file: " + path);
  names.clear();
  sequences.clear();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '>') {
      names.push_back(line.substr(1, line.find_first_of(" \t") - 1));
      sequences.emplace_back();
      continue;
    }
    if (sequences.empty())
      throw io_error("line " + std::to_string(line_no) + ": sequence before header");
    for (char c : line) {
      if (c == 'A' || c == 'C' || c == 'G' || c == 'T') {
        sequences.back().push_back(c);
      } else {
        throw io_error("line " + std::to_string(line_no) +
                       ": unsupported character '" + std::string(1, c) +
                       "' (gaps and ambiguity codes are rejected)");
      }
    }
  }
  if (names.empty()) throw io_error("FASTA file has no records: " + path);
  for (std::size_t i = 0; i < names.size(); ++i)
    if (sequences[i].empty()) throw io_error("FASTA record '" + names[i] + "' is empty");
}

std::string random_genome(std::size_t length, Rng& rng) {
  static constexpr char kBases[] = "ACGT";
  std::string g;
  g.resize(length);
  for (std::size_t i = 0; i < length;) {
    std::uint64_t bits = rng();
    for (int k = 0; k < 32 && i < length; ++k, bits >>= 2) g[i++] = kBases[bits & 3];
  }
  return g;
}

void write_digest_report(const DigestReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write digest report: " + path);
  out << "sequence\tfragments\tobserved_markers\tsuperpositions\texpected\tmarker_lengths\n";
  for (const auto& row : report.rows) {
    out << row.name << '\t' << row.fragment_count << '\t' << row.observed_marker_count
        << '\t' << row.superposition_count << '\t';
    if (report.expected_count > 0.0)
      out << report.expected_count;
    else
      out << "-";
    out << '\t';
    for (std::size_t i = 0; i < row.marker_lengths.size(); ++i) {
      if (i) out << ',';
      out << row.marker_lengths[i];
    }
    out << '\n';
  }
}

}  // namespace subid
