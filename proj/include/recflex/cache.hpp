#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "recflex/hash.hpp"
#include "recflex/types.hpp"

namespace recflex {

// Signals "rebuild required": stale fingerprint or unknown format version.
struct CacheMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr char kCacheMagic[8] = {'C', 'H', 'O', 'R', 'U', 'S', 'C', '1'};
inline constexpr std::uint32_t kCacheVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "cache serialization assumes a little-endian host");

namespace detail {

class BinWriter {
public:
    explicit BinWriter(std::ostream& out) : out_(out) {}

    template <typename T>
    void pod(T v) {
        out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void str(const std::string& s) {
        pod<std::uint64_t>(s.size());
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    template <typename T>
    void pod_vec(const std::vector<T>& v) {
        pod<std::uint64_t>(v.size());
        out_.write(reinterpret_cast<const char*>(v.data()),
                   static_cast<std::streamsize>(v.size() * sizeof(T)));
    }

private:
    std::ostream& out_;
};

class BinReader {
public:
    explicit BinReader(std::istream& in) : in_(in) {}

    template <typename T>
    T pod() {
        T v{};
        in_.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!in_) throw std::runtime_error("truncated cache file");
        return v;
    }
    std::string str() {
        auto n = pod<std::uint64_t>();
        std::string s(n, '\0');
        in_.read(s.data(), static_cast<std::streamsize>(n));
        if (!in_) throw std::runtime_error("truncated cache file");
        return s;
    }
    template <typename T>
    std::vector<T> pod_vec() {
        auto n = pod<std::uint64_t>();
        std::vector<T> v(n);
        in_.read(reinterpret_cast<char*>(v.data()),
                 static_cast<std::streamsize>(n * sizeof(T)));
        if (!in_) throw std::runtime_error("truncated cache file");
        return v;
    }

private:
    std::istream& in_;
};

inline void write_record(BinWriter& w, const InteractionRecord& r) {
    w.pod(r.user_id);
    w.pod(r.item_id);
    w.pod(r.time);
    w.pod(r.label);
    w.str(r.impression_id);
    w.pod_vec(r.situation);
    w.pod<std::uint64_t>(r.raw_situation.size());
    for (const auto& s : r.raw_situation) w.str(s);
    w.pod<std::uint8_t>(r.has_neg_items ? 1 : 0);
    w.pod_vec(r.neg_items);
    w.pod_vec(r.history);
}

inline InteractionRecord read_record(BinReader& rd) {
    InteractionRecord r;
    r.user_id = rd.pod<std::int32_t>();
    r.item_id = rd.pod<std::int32_t>();
    r.time = rd.pod<std::int64_t>();
    r.label = rd.pod<std::int8_t>();
    r.impression_id = rd.str();
    r.situation = rd.pod_vec<float>();
    auto n = rd.pod<std::uint64_t>();
    r.raw_situation.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) r.raw_situation.push_back(rd.str());
    r.has_neg_items = rd.pod<std::uint8_t>() != 0;
    r.neg_items = rd.pod_vec<std::int32_t>();
    r.history = rd.pod_vec<std::int32_t>();
    return r;
}

inline void write_feature(BinWriter& w, const FeatureDesc& f) {
    w.str(f.name);
    w.pod<std::uint8_t>(static_cast<std::uint8_t>(f.scope));
    w.pod<std::uint8_t>(f.categorical ? 1 : 0);
    w.pod(f.cardinality);
    w.pod<std::uint64_t>(f.vocab.size());
    for (const auto& [k, v] : f.vocab) {
        w.str(k);
        w.pod(v);
    }
    w.pod(f.mean);
    w.pod(f.stdev);
    w.pod<std::uint8_t>(f.constant ? 1 : 0);
}

inline FeatureDesc read_feature(BinReader& rd) {
    FeatureDesc f;
    f.name = rd.str();
    f.scope = static_cast<FeatureScope>(rd.pod<std::uint8_t>());
    f.categorical = rd.pod<std::uint8_t>() != 0;
    f.cardinality = rd.pod<std::int32_t>();
    auto n = rd.pod<std::uint64_t>();
    for (std::uint64_t i = 0; i < n; ++i) {
        std::string k = rd.str();
        f.vocab.emplace(std::move(k), rd.pod<std::int32_t>());
    }
    f.mean = rd.pod<double>();
    f.stdev = rd.pod<double>();
    f.constant = rd.pod<std::uint8_t>() != 0;
    return f;
}

inline void write_group(BinWriter& w, const ImpressionGroup& g) {
    w.str(g.impression_id);
    w.pod(g.user_id);
    w.pod(g.time);
    w.pod_vec(g.items);
    w.pod_vec(g.labels);
    std::vector<std::uint64_t> idx(g.record_indices.begin(), g.record_indices.end());
    w.pod_vec(idx);
}

inline ImpressionGroup read_group(BinReader& rd) {
    ImpressionGroup g;
    g.impression_id = rd.str();
    g.user_id = rd.pod<std::int32_t>();
    g.time = rd.pod<std::int64_t>();
    g.items = rd.pod_vec<std::int32_t>();
    g.labels = rd.pod_vec<std::int8_t>();
    for (auto i : rd.pod_vec<std::uint64_t>())
        g.record_indices.push_back(static_cast<std::size_t>(i));
    return g;
}

}  // namespace detail

inline void save_cache(const Corpus& corpus, const std::string& path,
                       const Digest& fingerprint) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write cache: " + path);
    out.write(kCacheMagic, sizeof(kCacheMagic));
    detail::BinWriter w(out);
    w.pod(kCacheVersion);
    out.write(reinterpret_cast<const char*>(fingerprint.data()),
              static_cast<std::streamsize>(fingerprint.size()));

    w.pod(corpus.n_users);
    w.pod(corpus.n_items);
    for (const auto& split : corpus.splits) {
        w.pod<std::uint64_t>(split.size());
        for (const auto& r : split) detail::write_record(w, r);
    }
    w.pod<std::uint64_t>(corpus.user_history.size());
    for (const auto& h : corpus.user_history) {
        w.pod<std::uint64_t>(h.size());
        for (const auto& [t, i] : h) {
            w.pod(t);
            w.pod(i);
        }
    }
    for (const auto& groups : corpus.impressions) {
        w.pod<std::uint64_t>(groups.size());
        for (const auto& g : groups) detail::write_group(w, g);
    }
    w.pod<std::uint64_t>(corpus.schema.features.size());
    for (const auto& f : corpus.schema.features) detail::write_feature(w, f);
    for (const auto* table : {&corpus.user_features, &corpus.item_features}) {
        w.pod<std::uint64_t>(table->size());
        for (const auto& row : *table) w.pod_vec(row);
    }
    w.pod_vec(corpus.user_raw);
    w.pod_vec(corpus.item_raw);
    w.pod<std::uint64_t>(corpus.situation_columns.size());
    for (const auto& c : corpus.situation_columns) w.str(c);
    w.pod_vec(corpus.item_train_count);
    if (!out) throw std::runtime_error("write failure: " + path);
}

inline Corpus load_cache(const std::string& path, const Digest& expected_fingerprint) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open cache: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0)
        throw CacheMismatch("cache rebuild required: bad magic");
    detail::BinReader rd(in);
    if (rd.pod<std::uint32_t>() != kCacheVersion)
        throw CacheMismatch("cache rebuild required: version mismatch");
    Digest fp{};
    in.read(reinterpret_cast<char*>(fp.data()), static_cast<std::streamsize>(fp.size()));
    if (!in || fp != expected_fingerprint)
        throw CacheMismatch("cache rebuild required: fingerprint mismatch");

    Corpus corpus;
    corpus.n_users = rd.pod<std::int32_t>();
    corpus.n_items = rd.pod<std::int32_t>();
    for (auto& split : corpus.splits) {
        auto n = rd.pod<std::uint64_t>();
        split.reserve(n);
        for (std::uint64_t i = 0; i < n; ++i) split.push_back(detail::read_record(rd));
    }
    auto nu = rd.pod<std::uint64_t>();
    corpus.user_history.resize(nu);
    for (auto& h : corpus.user_history) {
        auto n = rd.pod<std::uint64_t>();
        h.reserve(n);
        for (std::uint64_t i = 0; i < n; ++i) {
            auto t = rd.pod<std::int64_t>();
            h.emplace_back(t, rd.pod<std::int32_t>());
        }
    }
    for (auto& groups : corpus.impressions) {
        auto n = rd.pod<std::uint64_t>();
        groups.reserve(n);
        for (std::uint64_t i = 0; i < n; ++i) groups.push_back(detail::read_group(rd));
    }
    auto nf = rd.pod<std::uint64_t>();
    for (std::uint64_t i = 0; i < nf; ++i)
        corpus.schema.features.push_back(detail::read_feature(rd));
    for (auto* table : {&corpus.user_features, &corpus.item_features}) {
        auto n = rd.pod<std::uint64_t>();
        table->resize(n);
        for (auto& row : *table) row = rd.pod_vec<float>();
    }
    corpus.user_raw = rd.pod_vec<std::int64_t>();
    corpus.item_raw = rd.pod_vec<std::int64_t>();
    auto nc = rd.pod<std::uint64_t>();
    for (std::uint64_t i = 0; i < nc; ++i) corpus.situation_columns.push_back(rd.str());
    corpus.item_train_count = rd.pod_vec<std::int64_t>();

    for (std::int32_t i = 0; i < corpus.n_users; ++i)
        corpus.user_index.emplace(corpus.user_raw[i], i);
    for (std::int32_t i = 0; i < corpus.n_items; ++i)
        corpus.item_index.emplace(corpus.item_raw[i], i);
    return corpus;
}

}  // namespace recflex
