#pragma once

// Counter-based random streams. Every draw is a pure function of
// (key, substream, patient index, slot, replication), so draws for one purpose
// never shift the draws for another and replications can run in any order.

#include <array>
#include <cstdint>
#include <string_view>

namespace mabsim {

/// Philox4x32-10 block function (Salmon et al., SC'11).
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter counter, Key key);
};

/// Purposes that own disjoint counter ranges. The numeric values are part of
/// the reproducibility contract; do not reorder.
enum class Substream : std::uint32_t {
    allocation = 0,    // randomized allocation draw / index tie-break
    missingness = 1,   // missing iff u < p_k^m
    outcome = 2,       // success iff u < p_k
    perturbation = 3,  // RandUCB / RBI / RGI per-arm draws (slot = arm)
    imputation = 4,    // imputed success iff u < p_hat
    bootstrap = 5,     // metrics-layer resampling
};

/// 53-bit uniform in [0, 1) built from two 32-bit words.
double to_unit_double(std::uint32_t hi, std::uint32_t lo);

/// 64-bit splitmix finalizer.
std::uint64_t mix64(std::uint64_t x);

/// FNV-1a, used to turn a textual cell key into a stable id.
std::uint64_t fnv1a64(std::string_view text);

/// Key derived from the master seed and a cell id.
struct StreamKey {
    std::uint64_t value = 0;

    static StreamKey from(std::uint64_t master_seed, std::uint64_t cell_id);
    Philox4x32::Key words() const {
        return {static_cast<std::uint32_t>(value), static_cast<std::uint32_t>(value >> 32)};
    }
};

/// All randomness consumed by one replication.
class ReplicationRng {
public:
    ReplicationRng(StreamKey key, std::uint32_t replication) : key_(key.words()), replication_(replication) {}

    /// Uniform in [0, 1) for draw `slot` of `patient` within `stream`.
    double uniform(Substream stream, std::uint32_t patient, std::uint32_t slot = 0) const;

    std::uint32_t replication() const { return replication_; }

private:
    Philox4x32::Key key_;
    std::uint32_t replication_;
};

/// The draws one patient's allocation and outcome may consume.
class PatientDraws {
public:
    PatientDraws(const ReplicationRng& rng, std::uint32_t patient) : rng_(&rng), patient_(patient) {}

    double uniform(Substream stream, std::uint32_t slot = 0) const { return rng_->uniform(stream, patient_, slot); }
    std::uint32_t patient() const { return patient_; }

private:
    const ReplicationRng* rng_;
    std::uint32_t patient_;
};

}  // namespace mabsim
