#include "subid/tree.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace subid {

int PhyloTree::sibling(int v) const {
  const int p = nodes[v].parent;
  SUBID_CHECK(p >= 0, "root has no sibling");
  return nodes[p].left == v ? nodes[p].right : nodes[p].left;
}

void PhyloTree::validate() const {
  SUBID_REQUIRE(n_taxa() >= 2, "need at least two taxa");
  SUBID_REQUIRE(n_nodes() == 2 * n_taxa() - 1, "node count must be 2T-1");
  SUBID_REQUIRE(root >= 0 && nodes[root].parent < 0, "bad root");
  int leaves = 0;
  for (int v = 0; v < n_nodes(); ++v) {
    const Node& nd = nodes[v];
    if (nd.is_leaf()) {
      SUBID_REQUIRE(v < n_taxa(), "leaves must be the first T nodes");
      ++leaves;
    } else {
      SUBID_REQUIRE(nd.left >= 0 && nd.right >= 0, "internal node needs two children");
      SUBID_REQUIRE(nodes[nd.left].parent == v && nodes[nd.right].parent == v,
                    "parent/child links inconsistent");
    }
    if (v != root) SUBID_REQUIRE(edge_length[v] > 0.0, "edge lengths must be positive");
  }
  SUBID_REQUIRE(leaves == n_taxa(), "leaf count mismatch");
}

std::vector<int> PhyloTree::preorder() const {
  std::vector<int> order;
  order.reserve(n_nodes());
  std::vector<int> stack{root};
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    order.push_back(v);
    if (!nodes[v].is_leaf()) {
      stack.push_back(nodes[v].right);
      stack.push_back(nodes[v].left);
    }
  }
  return order;
}

std::vector<int> PhyloTree::internal_nodes_except_root() const {
  std::vector<int> out;
  for (int v = 0; v < n_nodes(); ++v)
    if (!is_leaf(v) && v != root) out.push_back(v);
  return out;
}

PhyloTree random_tree(const std::vector<std::string>& taxa, double gamma_mean, Rng& rng) {
  const int t = static_cast<int>(taxa.size());
  SUBID_REQUIRE(t >= 2, "need at least two taxa");
  PhyloTree tree;
  tree.taxon_names = taxa;
  tree.nodes.resize(2 * t - 1);
  tree.edge_length.assign(2 * t - 1, 0.0);
  std::vector<int> roots;
  for (int i = 0; i < t; ++i) roots.push_back(i);
  int next = t;
  while (roots.size() > 1) {
    const int a = runif_int(rng, 0, static_cast<int>(roots.size()) - 1);
    int b = runif_int(rng, 0, static_cast<int>(roots.size()) - 2);
    if (b >= a) ++b;
    const int u = roots[a];
    const int v = roots[b];
    tree.nodes[next].left = u;
    tree.nodes[next].right = v;
    tree.nodes[u].parent = next;
    tree.nodes[v].parent = next;
    roots.erase(std::remove(roots.begin(), roots.end(), u), roots.end());
    roots.erase(std::remove(roots.begin(), roots.end(), v), roots.end());
    roots.push_back(next);
    ++next;
  }
  tree.root = roots.front();
  for (int v = 0; v < tree.n_nodes(); ++v)
    if (v != tree.root) tree.edge_length[v] = rexp(rng, 1.0 / gamma_mean);
  tree.validate();
  return tree;
}

namespace {

void write_node(const PhyloTree& tree, int v, std::ostringstream& out) {
  if (tree.is_leaf(v)) {
    out << tree.taxon_names[v];
  } else {
    out << '(';
    write_node(tree, tree.nodes[v].left, out);
    out << ',';
    write_node(tree, tree.nodes[v].right, out);
    out << ')';
  }
  if (v != tree.root) {
    out << ':';
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", tree.edge_length[v]);
    out << buf;
  }
}

struct NewickParser {
  const std::string& text;
  std::size_t pos = 0;

  explicit NewickParser(const std::string& s) : text(s) {}

  char peek() {
    SUBID_REQUIRE(pos < text.size(), "unexpected end of newick string");
    return text[pos];
  }
  void expect(char c) {
    SUBID_REQUIRE(peek() == c, std::string("newick: expected '") + c + "'");
    ++pos;
  }

  struct Parsed {
    std::vector<PhyloTree::Node> nodes;
    std::vector<double> lengths;
    std::vector<std::string> names;  // per node; empty for internal
  };

  int parse_clade(Parsed& p) {
    int node;
    if (peek() == '(') {
      ++pos;
      const int l = parse_clade(p);
      expect(',');
      const int r = parse_clade(p);
      expect(')');
      node = static_cast<int>(p.nodes.size());
      p.nodes.push_back({});
      p.lengths.push_back(0.0);
      p.names.emplace_back();
      p.nodes[node].left = l;
      p.nodes[node].right = r;
      p.nodes[l].parent = node;
      p.nodes[r].parent = node;
    } else {
      std::string name;
      while (pos < text.size() && (std::isalnum(static_cast<unsigned char>(text[pos])) ||
                                   text[pos] == '_' || text[pos] == '.' || text[pos] == '-'))
        name += text[pos++];
      SUBID_REQUIRE(!name.empty(), "newick: empty taxon name");
      node = static_cast<int>(p.nodes.size());
      p.nodes.push_back({});
      p.lengths.push_back(0.0);
      p.names.push_back(name);
    }
    if (pos < text.size() && text[pos] == ':') {
      ++pos;
      std::size_t used = 0;
      p.lengths[node] = std::stod(text.substr(pos), &used);
      pos += used;
    }
    return node;
  }
};

}  // namespace

std::string write_newick(const PhyloTree& tree) {
  std::ostringstream out;
  write_node(tree, tree.root, out);
  out << ';';
  return out.str();
}

PhyloTree parse_newick(const std::string& text) {
  NewickParser parser(text);
  NewickParser::Parsed parsed;
  const int root = parser.parse_clade(parsed);
  SUBID_REQUIRE(parser.pos < text.size() && text[parser.pos] == ';',
                "newick: missing terminating ';'");

  // Re-index: leaves first in name-sorted order, then internals.
  const int n = static_cast<int>(parsed.nodes.size());
  std::vector<int> leaves;
  for (int v = 0; v < n; ++v)
    if (parsed.nodes[v].left < 0) leaves.push_back(v);
  std::sort(leaves.begin(), leaves.end(),
            [&](int a, int b) { return parsed.names[a] < parsed.names[b]; });
  std::vector<int> remap(n, -1);
  PhyloTree tree;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    remap[leaves[i]] = static_cast<int>(i);
    tree.taxon_names.push_back(parsed.names[leaves[i]]);
  }
  int next = static_cast<int>(leaves.size());
  for (int v = 0; v < n; ++v)
    if (parsed.nodes[v].left >= 0) remap[v] = next++;
  tree.nodes.resize(n);
  tree.edge_length.assign(n, 0.0);
  for (int v = 0; v < n; ++v) {
    const int w = remap[v];
    tree.nodes[w].parent = parsed.nodes[v].parent < 0 ? -1 : remap[parsed.nodes[v].parent];
    tree.nodes[w].left = parsed.nodes[v].left < 0 ? -1 : remap[parsed.nodes[v].left];
    tree.nodes[w].right = parsed.nodes[v].right < 0 ? -1 : remap[parsed.nodes[v].right];
    tree.edge_length[w] = parsed.lengths[v];
  }
  tree.root = remap[root];
  tree.validate();
  return tree;
}

double log_num_rooted_topologies(int t) {
  SUBID_REQUIRE(t >= 2, "need at least two taxa");
  double acc = 0.0;
  for (int k = 3; k <= 2 * t - 3; k += 2) acc += std::log(static_cast<double>(k));
  return acc;
}

std::vector<std::uint64_t> node_clades(const PhyloTree& tree) {
  SUBID_REQUIRE(tree.n_taxa() <= 64, "clade bitmasks support up to 64 taxa");
  std::vector<std::uint64_t> clade(tree.n_nodes(), 0);
  const std::vector<int> order = tree.preorder();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int v = *it;
    if (tree.is_leaf(v))
      clade[v] = std::uint64_t{1} << v;
    else
      clade[v] = clade[tree.nodes[v].left] | clade[tree.nodes[v].right];
  }
  return clade;
}

}  // namespace subid
