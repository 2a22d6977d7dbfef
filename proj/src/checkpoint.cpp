#include "vibe/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace vibe::checkpoint {

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
    std::array<char, 8> b{};
    for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b.data(), 8);
}

std::uint64_t get_u64(std::istream& in) {
    std::array<unsigned char, 8> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 8)) throw Error("bad-checkpoint", "truncated");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
}

}  // namespace

void save(const std::string& path, const classify::VibeState& state, const corpus::LabelMap& labels,
          const corpus::Vocabulary& vocab) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io", "cannot write " + path);
    out.write(kMagic, 5);
    for (int d : {state.ntm.vocab, state.ntm.topics, state.ntm.hidden, state.classes(),
                  state.time_buckets(), state.embedding.width(), state.head_hidden()})
        put_u64(out, static_cast<std::uint64_t>(d));
    // tensors() hands out mutable views; nothing is written through them here.
    std::vector<char> buf;
    for (const auto& t : const_cast<classify::VibeState&>(state).tensors()) {
        buf.resize(t.data.size() * 8);
        for (std::size_t i = 0; i < t.data.size(); ++i) {
            const auto bits = std::bit_cast<std::uint64_t>(t.data[i]);
            for (int k = 0; k < 8; ++k) buf[i * 8 + static_cast<std::size_t>(k)] = static_cast<char>((bits >> (8 * k)) & 0xff);
        }
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    if (!out) throw Error("io", "write failed: " + path);
    corpus::write_label_map(path + ".labels", labels);
    corpus::write_vocabulary(path + ".vocab", vocab);
}

Loaded load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open " + path);
    char magic[5];
    if (!in.read(magic, 5) || std::memcmp(magic, kMagic, 5) != 0)
        throw Error("bad-checkpoint", path + ": missing VIBE1 header");
    std::array<int, 7> d{};
    for (auto& v : d) {
        const auto raw = get_u64(in);
        if (raw == 0 || raw > (1u << 30)) throw Error("bad-checkpoint", path + ": bad dimensions");
        v = static_cast<int>(raw);
    }
    Loaded l{classify::VibeState(d[0], d[1], d[2], d[6], d[5], d[3], d[4]), {}, {}};
    std::vector<unsigned char> buf;
    for (auto& t : l.state.tensors()) {
        buf.resize(t.data.size() * 8);
        if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
            throw Error("bad-checkpoint", path + ": truncated");
        for (std::size_t i = 0; i < t.data.size(); ++i) {
            std::uint64_t bits = 0;
            for (int k = 7; k >= 0; --k) bits = (bits << 8) | buf[i * 8 + static_cast<std::size_t>(k)];
            t.data[i] = std::bit_cast<double>(bits);
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) throw Error("bad-checkpoint", path + ": trailing bytes");
    l.labels = corpus::read_label_map(path + ".labels");
    l.vocab = corpus::read_vocabulary(path + ".vocab");
    if (static_cast<int>(l.vocab.size()) != d[0]) throw Error("bad-checkpoint", "vocabulary size mismatch");
    return l;
}

}  // namespace vibe::checkpoint
