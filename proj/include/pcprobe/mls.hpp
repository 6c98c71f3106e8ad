#ifndef PCPROBE_MLS_HPP
#define PCPROBE_MLS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcprobe/common.hpp"

namespace pcprobe {

/// Maximal-length ±1 chip sequence from a Fibonacci LFSR.
struct ChipSequence {
    int order = 0;
    std::vector<int> taps;       // feedback tap positions, 1-based
    std::uint32_t seed = 0;      // initial register state, nonzero
    std::vector<int> chips;      // values in {+1, -1}, length 2^order - 1

    std::size_t length() const { return chips.size(); }
};

/// Feedback taps of a primitive polynomial per register length.
inline const std::vector<int>& default_taps(int order) {
    static const std::map<int, std::vector<int>> table = {
        {2, {2, 1}},           {3, {3, 2}},           {4, {4, 3}},
        {5, {5, 3}},           {6, {6, 5}},           {7, {7, 6}},
        {8, {8, 6, 5, 4}},     {9, {9, 5}},           {10, {10, 7}},
        {11, {11, 9}},         {12, {12, 11, 10, 4}}, {13, {13, 12, 11, 8}},
        {14, {14, 13, 12, 2}}, {15, {15, 14}},        {16, {16, 15, 13, 4}},
        {17, {17, 14}},        {18, {18, 11}},        {19, {19, 18, 17, 14}},
        {20, {20, 17}},        {21, {21, 19}},        {22, {22, 21}},
        {23, {23, 18}},        {24, {24, 23, 22, 17}},
    };
    auto it = table.find(order);
    if (it == table.end())
        throw Error("generate_mls: unsupported order " + std::to_string(order));
    return it->second;
}

/// Generate a maximal-length sequence of period 2^order - 1. Bits map to
/// chips as b -> 1 - 2b. A full cycle check rejects taps whose period is
/// shorter than 2^order - 1.
inline ChipSequence generate_mls(int order,
                                 std::optional<std::vector<int>> taps = std::nullopt,
                                 std::optional<std::uint32_t> seed = std::nullopt) {
    if (order < 2 || order > 24)
        throw Error("generate_mls: order must be in [2, 24], got " + std::to_string(order));
    ChipSequence seq;
    seq.order = order;
    seq.taps = taps ? *taps : default_taps(order);
    const std::uint32_t mask = (order == 32) ? 0xffffffffu : ((1u << order) - 1u);
    seq.seed = seed ? *seed : mask; // all-ones register
    if (seq.seed == 0) throw Error("generate_mls: seed must be nonzero");
    if ((seq.seed & ~mask) != 0) throw Error("generate_mls: seed wider than register");
    for (int t : seq.taps)
        if (t < 1 || t > order) throw Error("generate_mls: tap position out of range");

    const std::size_t period = (std::size_t{1} << order) - 1;
    seq.chips.reserve(period);
    std::uint32_t state = seq.seed;
    for (std::size_t k = 0; k < period; ++k) {
        seq.chips.push_back(1 - 2 * static_cast<int>(state & 1u));
        std::uint32_t fb = 0;
        for (int t : seq.taps) fb ^= (state >> (order - t)) & 1u;
        state = (state >> 1) | (fb << (order - 1));
        if (state == seq.seed && k + 1 < period)
            throw Error("generate_mls: taps give period " + std::to_string(k + 1) +
                        " < " + std::to_string(period) + " (not primitive)");
    }
    if (state != seq.seed)
        throw Error("generate_mls: register did not return to seed after full period");
    return seq;
}

/// Periodic autocorrelation r[l] = sum_i chips[i]*chips[(i+l) mod N].
inline std::vector<long long> circular_autocorrelation(const std::vector<int>& chips) {
    const std::size_t n = chips.size();
    std::vector<long long> r(n, 0);
    for (std::size_t l = 0; l < n; ++l) {
        long long acc = 0;
        for (std::size_t i = 0; i < n; ++i)
            acc += static_cast<long long>(chips[i]) * chips[(i + l) % n];
        r[l] = acc;
    }
    return r;
}

inline nlohmann::json to_json(const ChipSequence& seq) {
    return nlohmann::json{
        {"order", seq.order}, {"taps", seq.taps}, {"seed", seq.seed}, {"chips", seq.chips}};
}

inline ChipSequence chip_sequence_from_json(const nlohmann::json& j) {
    ChipSequence seq;
    seq.order = j.at("order").get<int>();
    seq.taps = j.at("taps").get<std::vector<int>>();
    seq.seed = j.at("seed").get<std::uint32_t>();
    seq.chips = j.at("chips").get<std::vector<int>>();
    return seq;
}

} // namespace pcprobe

#endif
