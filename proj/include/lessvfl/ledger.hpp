#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace lessvfl {

// Payloads are priced at 32-bit width on the wire regardless of the 64-bit
// arithmetic used internally. Index sets and metadata are priced at zero.
inline constexpr std::uint64_t kWireBytesPerScalar = 4;

enum class Phase { Pretrain, Stage2Upload, Stage3, PostFS };

inline const char* phase_name(Phase p) {
    switch (p) {
        case Phase::Pretrain: return "pretrain";
        case Phase::Stage2Upload: return "stage2_upload";
        case Phase::Stage3: return "stage3";
        case Phase::PostFS: return "post_fs";
    }
    return "?";
}

struct PhaseCounters {
    std::uint64_t bytes_up = 0;    // party -> server
    std::uint64_t bytes_down = 0;  // server -> party
    std::uint64_t rounds = 0;
};

struct CommLedger {
    std::array<PhaseCounters, 4> phases{};

    PhaseCounters& at(Phase p) { return phases[static_cast<size_t>(p)]; }
    const PhaseCounters& at(Phase p) const { return phases[static_cast<size_t>(p)]; }

    void add_up(Phase p, std::uint64_t bytes) { at(p).bytes_up += bytes; }
    void add_down(Phase p, std::uint64_t bytes) { at(p).bytes_down += bytes; }
    void add_round(Phase p) { at(p).rounds += 1; }

    std::uint64_t total_bytes() const {
        std::uint64_t t = 0;
        for (const auto& c : phases) t += c.bytes_up + c.bytes_down;
        return t;
    }
};

/// Total traffic in decimal megabytes (bytes / 1e6), as reported in cost tables.
inline double ledger_total_mb(const CommLedger& ledger) {
    return static_cast<double>(ledger.total_bytes()) / 1e6;
}

}  // namespace lessvfl
