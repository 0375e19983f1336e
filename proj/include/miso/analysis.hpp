#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "miso/ast.hpp"

namespace miso {

// Per cell type: the arrays its transition reads via array accesses, plus
// whether it reads any of its own fields.
struct ReadSet {
  struct CellReads {
    std::set<std::string> arrays;
    bool self = false;
  };
  std::map<std::string, CellReads> byCell;
};

namespace detail {

inline void collectReads(const Expr& e, ReadSet::CellReads& out) {
  if (e.kind == Expr::Kind::ArrayRead) out.arrays.insert(e.name);
  if (e.kind == Expr::Kind::SelfField) out.self = true;
  if (e.lhs) collectReads(*e.lhs, out);
  if (e.rhs) collectReads(*e.rhs, out);
}

}  // namespace detail

inline ReadSet extractReadSet(const Program& p) {
  ReadSet rs;
  for (const auto& cell : p.cells) {
    ReadSet::CellReads reads;
    for (const auto& s : cell.transition) detail::collectReads(*s.value, reads);
    rs.byCell.emplace(cell.name, std::move(reads));
  }
  return rs;
}

// Array-level dependency graph: directed edges reader -> provider, plus a
// self-loop when a cell type reads its own previous state. Static for a given
// program; dependence granularity is the whole array because read indices are
// runtime values.
struct DepGraph {
  uint32_t nodes = 0;
  std::vector<std::vector<uint32_t>> out;        // sorted, unique; may contain self
  std::vector<std::vector<uint32_t>> neighbors;  // undirected closure, self excluded

  bool hasEdge(uint32_t from, uint32_t to) const {
    return std::binary_search(out[from].begin(), out[from].end(), to);
  }
};

inline DepGraph buildDepGraph(const Program& p, const ReadSet& rs) {
  DepGraph g;
  g.nodes = static_cast<uint32_t>(p.arrays.size());
  g.out.resize(g.nodes);
  g.neighbors.resize(g.nodes);
  for (uint32_t a = 0; a < g.nodes; ++a) {
    const auto& reads = rs.byCell.at(p.cells[p.arrays[a].typeIndex].name);
    for (const auto& target : reads.arrays)
      g.out[a].push_back(static_cast<uint32_t>(p.arrayIndex(target)));
    if (reads.self) g.out[a].push_back(a);
    std::sort(g.out[a].begin(), g.out[a].end());
    g.out[a].erase(std::unique(g.out[a].begin(), g.out[a].end()), g.out[a].end());
  }
  for (uint32_t a = 0; a < g.nodes; ++a) {
    for (uint32_t b : g.out[a]) {
      if (b == a) continue;
      g.neighbors[a].push_back(b);
      g.neighbors[b].push_back(a);
    }
  }
  for (auto& ns : g.neighbors) {
    std::sort(ns.begin(), ns.end());
    ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  }
  return g;
}

// Parallel-structure summary: weakly-connected components (arrays with no
// direct or indirect coupling can run unsynchronized), per-type instance
// counts (data parallelism) and the number of distinct transition kinds in
// flight (task parallelism).
struct ParallelReport {
  std::vector<std::vector<uint32_t>> components;  // each sorted; ordered by min id
  struct SimdGroup {
    std::string cellType;
    uint32_t arrayCount = 0;
    uint64_t totalInstances = 0;
  };
  std::vector<SimdGroup> simdGroups;  // instantiated cell types, declaration order
  uint32_t mimdCellTypes = 0;         // instantiated types with nonempty transitions
};

inline ParallelReport classify(const DepGraph& g, const Program& p) {
  ParallelReport rep;
  std::vector<uint32_t> parent(g.nodes);
  std::iota(parent.begin(), parent.end(), 0u);
  std::function<uint32_t(uint32_t)> find = [&](uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (uint32_t a = 0; a < g.nodes; ++a)
    for (uint32_t b : g.neighbors[a]) parent[find(a)] = find(b);

  std::map<uint32_t, std::vector<uint32_t>> byRoot;
  for (uint32_t a = 0; a < g.nodes; ++a) byRoot[find(a)].push_back(a);
  std::vector<std::vector<uint32_t>> comps;
  for (auto& [root, members] : byRoot) comps.push_back(std::move(members));
  std::sort(comps.begin(), comps.end(),
            [](const auto& x, const auto& y) { return x.front() < y.front(); });
  rep.components = std::move(comps);

  for (size_t ci = 0; ci < p.cells.size(); ++ci) {
    ParallelReport::SimdGroup grp;
    grp.cellType = p.cells[ci].name;
    for (const auto& a : p.arrays) {
      if (a.typeIndex == static_cast<int32_t>(ci)) {
        ++grp.arrayCount;
        grp.totalInstances += static_cast<uint64_t>(a.size);
      }
    }
    if (grp.arrayCount == 0) continue;
    if (!p.cells[ci].transition.empty()) ++rep.mimdCellTypes;
    rep.simdGroups.push_back(std::move(grp));
  }
  return rep;
}

// Deterministic GraphViz text: nodes labeled "array:CellType[size]", edges in
// array-id order, self-loops included.
inline std::string emitDot(const DepGraph& g, const Program& p) {
  std::string out = "digraph miso {\n";
  for (uint32_t a = 0; a < g.nodes; ++a) {
    out += "  n" + std::to_string(a) + " [label=\"" + p.arrays[a].name + ":" +
           p.arrays[a].typeName + "[" + std::to_string(p.arrays[a].size) + "]\"];\n";
  }
  for (uint32_t a = 0; a < g.nodes; ++a)
    for (uint32_t b : g.out[a])
      out += "  n" + std::to_string(a) + " -> n" + std::to_string(b) + ";\n";
  out += "}\n";
  return out;
}

}  // namespace miso
