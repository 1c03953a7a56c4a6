#pragma once

// Directed supply network in compressed sparse form with both traversal
// directions, plus the binary edge-list file format.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scdd/error.hpp"
#include "scdd/sampler.hpp"

namespace scdd {

struct Edge {
  NodeId supplier;
  NodeId buyer;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Edges point supplier -> buyer. `buyers(i)` walks the forward index;
/// `suppliers(i)` the reverse one (row i of the buyer-supplier incidence).
class SupplyNetwork {
 public:
  SupplyNetwork() : out_offsets_(1, 0), in_offsets_(1, 0) {}

  /// Builds both indexes from edges already sorted by (buyer, supplier)
  /// without duplicates.
  static SupplyNetwork from_sorted_by_buyer(std::size_t n_nodes, const std::vector<Edge>& edges) {
    SupplyNetwork net;
    net.n_nodes_ = n_nodes;
    net.in_offsets_.assign(n_nodes + 1, 0);
    net.out_offsets_.assign(n_nodes + 1, 0);
    net.in_sources_.resize(edges.size());
    net.out_targets_.resize(edges.size());
    for (const auto& e : edges) {
      ++net.in_offsets_[e.buyer + 1];
      ++net.out_offsets_[e.supplier + 1];
    }
    for (std::size_t i = 0; i < n_nodes; ++i) {
      net.in_offsets_[i + 1] += net.in_offsets_[i];
      net.out_offsets_[i + 1] += net.out_offsets_[i];
    }
    std::vector<std::uint64_t> cursor(net.out_offsets_.begin(), net.out_offsets_.end() - 1);
    for (std::size_t k = 0; k < edges.size(); ++k) {
      net.in_sources_[k] = edges[k].supplier;
      net.out_targets_[cursor[edges[k].supplier]++] = edges[k].buyer;
    }
    return net;
  }

  /// Sorts, drops duplicates and self-loops, then builds the indexes.
  static SupplyNetwork from_edges(std::size_t n_nodes, std::vector<Edge> edges) {
    for (const auto& e : edges) {
      if (e.supplier >= n_nodes || e.buyer >= n_nodes) throw Error(ErrorKind::validation, "edge endpoint out of range");
    }
    std::erase_if(edges, [](const Edge& e) { return e.supplier == e.buyer; });
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
      return a.buyer != b.buyer ? a.buyer < b.buyer : a.supplier < b.supplier;
    });
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return from_sorted_by_buyer(n_nodes, edges);
  }

  std::size_t n_nodes() const { return n_nodes_; }
  std::size_t n_edges() const { return in_sources_.size(); }

  std::span<const NodeId> suppliers(NodeId buyer) const {
    return {in_sources_.data() + in_offsets_[buyer], in_sources_.data() + in_offsets_[buyer + 1]};
  }
  std::span<const NodeId> buyers(NodeId supplier) const {
    return {out_targets_.data() + out_offsets_[supplier], out_targets_.data() + out_offsets_[supplier + 1]};
  }
  std::size_t in_degree(NodeId i) const { return in_offsets_[i + 1] - in_offsets_[i]; }
  std::size_t out_degree(NodeId i) const { return out_offsets_[i + 1] - out_offsets_[i]; }

  bool has_edge(NodeId supplier, NodeId buyer) const {
    const auto s = suppliers(buyer);
    return std::binary_search(s.begin(), s.end(), supplier);
  }

  /// Edges in (buyer, supplier) order, the on-disk order.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(n_edges());
    for (NodeId b = 0; b < n_nodes_; ++b) {
      for (NodeId s : suppliers(b)) out.push_back({s, b});
    }
    return out;
  }

  /// Checks sortedness, absence of self-loops and duplicates, and that the
  /// reverse index is the exact transpose of the forward one.
  bool consistent() const {
    if (in_offsets_.size() != n_nodes_ + 1 || out_offsets_.size() != n_nodes_ + 1) return false;
    if (in_offsets_.back() != in_sources_.size() || out_offsets_.back() != out_targets_.size()) return false;
    if (in_sources_.size() != out_targets_.size()) return false;
    for (NodeId b = 0; b < n_nodes_; ++b) {
      const auto s = suppliers(b);
      for (std::size_t k = 0; k < s.size(); ++k) {
        if (s[k] >= n_nodes_ || s[k] == b) return false;
        if (k && s[k - 1] >= s[k]) return false;
        const auto back = buyers(s[k]);
        if (!std::binary_search(back.begin(), back.end(), b)) return false;
      }
    }
    for (NodeId a = 0; a < n_nodes_; ++a) {
      const auto t = buyers(a);
      for (std::size_t k = 0; k < t.size(); ++k) {
        if (k && t[k - 1] >= t[k]) return false;
        if (t[k] >= n_nodes_ || !has_edge(a, t[k])) return false;
      }
    }
    return true;
  }

  friend bool operator==(const SupplyNetwork& a, const SupplyNetwork& b) {
    return a.n_nodes_ == b.n_nodes_ && a.in_offsets_ == b.in_offsets_ && a.in_sources_ == b.in_sources_;
  }

 private:
  std::size_t n_nodes_ = 0;
  std::vector<std::uint64_t> out_offsets_;
  std::vector<NodeId> out_targets_;
  std::vector<std::uint64_t> in_offsets_;
  std::vector<NodeId> in_sources_;
};

// ---------------------------------------------------------------------------
// Binary edge list: "SCDN", u32 version, u64 n_nodes, u64 n_edges, then
// (u64 supplier, u64 buyer) pairs sorted by buyer then supplier. All
// integers little-endian.

inline constexpr char kNetworkMagic[4] = {'S', 'C', 'D', 'N'};
inline constexpr std::uint32_t kNetworkFormatVersion = 1;
inline constexpr std::size_t kNetworkHeaderBytes = 4 + 4 + 8 + 8;

static_assert(std::endian::native == std::endian::little, "network file I/O assumes a little-endian host");

inline void write_network(const SupplyNetwork& net, std::ostream& out) {
  out.write(kNetworkMagic, 4);
  const std::uint32_t version = kNetworkFormatVersion;
  const std::uint64_t n = net.n_nodes(), m = net.n_edges();
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(&m), sizeof m);
  std::vector<std::uint64_t> buf;
  buf.reserve(2 * 4096);
  for (NodeId b = 0; b < net.n_nodes(); ++b) {
    for (NodeId s : net.suppliers(b)) {
      buf.push_back(s);
      buf.push_back(b);
      if (buf.size() == buf.capacity()) {
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 8));
        buf.clear();
      }
    }
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 8));
}

inline void write_network(const SupplyNetwork& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path + "'");
  write_network(net, out);
  if (!out) throw Error(ErrorKind::io, "failed writing '" + path + "'");
}

struct NetworkHeader {
  std::uint32_t version = 0;
  std::uint64_t n_nodes = 0;
  std::uint64_t n_edges = 0;
};

/// Any structural defect (magic, version, size, ordering, range, self-loop)
/// is reported as an integrity error.
inline SupplyNetwork read_network(const std::string& path, NetworkHeader* header_out = nullptr) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "'");
  const auto size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0);
  auto fail = [&](const std::string& why) { return Error(ErrorKind::integrity, path + ": " + why); };
  if (size < kNetworkHeaderBytes) throw fail("truncated header");

  char magic[4];
  NetworkHeader h;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&h.version), 4);
  in.read(reinterpret_cast<char*>(&h.n_nodes), 8);
  in.read(reinterpret_cast<char*>(&h.n_edges), 8);
  if (std::memcmp(magic, kNetworkMagic, 4) != 0) throw fail("bad magic");
  if (h.version != kNetworkFormatVersion) throw fail("unsupported format version " + std::to_string(h.version));
  if (h.n_nodes > std::numeric_limits<NodeId>::max()) throw fail("node count exceeds 32-bit ids");
  if (size != kNetworkHeaderBytes + 16 * h.n_edges) throw fail("file size does not match edge count");

  std::vector<Edge> edges;
  edges.reserve(h.n_edges);
  std::vector<std::uint64_t> buf(2 * 4096);
  std::uint64_t remaining = h.n_edges;
  Edge prev{0, 0};
  while (remaining > 0) {
    const std::uint64_t chunk = std::min<std::uint64_t>(remaining, 4096);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(chunk * 16));
    if (!in) throw fail("short read");
    for (std::uint64_t k = 0; k < chunk; ++k) {
      const std::uint64_t s = buf[2 * k], b = buf[2 * k + 1];
      if (s >= h.n_nodes || b >= h.n_nodes) throw fail("edge endpoint out of range");
      if (s == b) throw fail("self-loop");
      const Edge e{static_cast<NodeId>(s), static_cast<NodeId>(b)};
      if (!edges.empty() && (e.buyer < prev.buyer || (e.buyer == prev.buyer && e.supplier <= prev.supplier))) {
        throw fail("edges not strictly sorted by (buyer, supplier)");
      }
      edges.push_back(e);
      prev = e;
    }
    remaining -= chunk;
  }
  if (header_out) *header_out = h;
  return SupplyNetwork::from_sorted_by_buyer(h.n_nodes, edges);
}

}  // namespace scdd
