#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace debiasrec {

// One observed feedback event. label is -1/+1; position is 1-based display
// rank for list feedback, 0 when absent.
struct Interaction {
    int user = 0;
    int item = 0;
    int label = 0;
    int position = 0;

    bool has_position() const { return position > 0; }
};

enum class FeedbackKind { Explicit, Implicit, List };

std::string to_string(FeedbackKind k);
FeedbackKind feedback_kind_from_string(const std::string& s);

// The four splits plus index metadata. Immutable after construction.
struct DatasetBundle {
    std::vector<Interaction> train;       // D_T
    std::vector<Interaction> uniform;     // D_U
    std::vector<Interaction> validation;  // D_V
    std::vector<Interaction> test;        // D_Te
    int n_users = 0;
    int n_items = 0;
    FeedbackKind feedback_kind = FeedbackKind::Explicit;
    std::uint64_t seed = 0;

    // raw id -> internal 0-based index (identity when data was generated)
    std::unordered_map<long, int> user_index;
    std::unordered_map<long, int> item_index;

    int max_position() const;
    void check() const;  // throws on invariant violation
};

struct SplitRatios {
    double uniform = 0.05;
    double validation = 0.05;
    double test = 0.90;
};

// rating in 1..5 -> +1 iff rating > 3
int binarize(int rating);

// Loads "user item rating" text files. The biased file becomes train
// (multiset semantics); the unbiased file is shuffled with `seed` and
// partitioned by `ratios`, deduplicated last-wins in test.
DatasetBundle load_explicit(const std::string& path_biased,
                            const std::string& path_unbiased,
                            const SplitRatios& ratios, std::uint64_t seed);

// Drops negative training rows; other splits unchanged.
DatasetBundle to_implicit(const DatasetBundle& bundle);

// O(u,i) = 1 iff (u,i) occurs in train; also remembers the last observed
// label per pair (used for meta features and label-conditioned propensity).
class ObservationIndicator {
public:
    ObservationIndicator() = default;
    ObservationIndicator(const std::vector<Interaction>& train, int n_users, int n_items);

    bool observed(int u, int i) const;
    // label of the (last) training row at (u,i); nullopt when unobserved
    std::optional<int> observed_label(int u, int i) const;
    std::size_t count() const { return pairs_.size(); }

private:
    std::int64_t key(int u, int i) const { return static_cast<std::int64_t>(u) * n_items_ + i; }
    std::unordered_map<std::int64_t, int> pairs_;
    int n_items_ = 1;
};

// Plain-text serialization: one file per split plus metadata.txt.
void save_bundle(const DatasetBundle& bundle, const std::string& dir);
DatasetBundle load_bundle(const std::string& dir);

}  // namespace debiasrec
