#pragma once

#include <string>

#include "vibe/classify.hpp"
#include "vibe/corpus.hpp"

namespace vibe::checkpoint {

inline constexpr char kMagic[] = "VIBE1";

// Binary layout: "VIBE1", then uint64 LE dims V, K, hidden, C, T, E, head_hidden,
// then every tensor of VibeState::tensors() in order as LE float64.
// Sidecars: <path>.labels (label map) and <path>.vocab (vocabulary).
void save(const std::string& path, const classify::VibeState& state, const corpus::LabelMap& labels,
          const corpus::Vocabulary& vocab);

struct Loaded {
    classify::VibeState state;
    corpus::LabelMap labels;
    corpus::Vocabulary vocab;
};

// Throws "bad-checkpoint" on a wrong header or truncated payload.
Loaded load(const std::string& path);

}  // namespace vibe::checkpoint
