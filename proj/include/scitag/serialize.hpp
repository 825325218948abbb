#pragma once

#include <string>

#include "scitag/encoder.hpp"
#include "scitag/graph.hpp"

namespace scitag::io {

// Model checkpoint: magic "STSSL1", a version byte, then length-prefixed
// named blocks. Parameter blocks hold 64-bit little-endian reals (row-major);
// one string-list block carries the word vocabulary. Round trips are
// bit-exact.
void save_model(const std::string& path, const encoder::ModelParams& params);
encoder::ModelParams load_model(const std::string& path);

// Graph checkpoint: magic "STGRF1", a version byte, node and edge counts,
// the edge list as (u, v, distance) 64-bit values, then per-node references
// and distributions.
void save_graph(const std::string& path, const graph::PropagationGraph& graph);
graph::PropagationGraph load_graph(const std::string& path);

}  // namespace scitag::io
