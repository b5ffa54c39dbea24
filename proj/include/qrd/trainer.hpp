#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qrd/corpus.hpp"
#include "qrd/mutual.hpp"
#include "qrd/router.hpp"
#include "qrd/student.hpp"

namespace qrd {

struct TrainConfig {
    double lambda1 = 0.1;
    double lambda2 = 0.01;
    // Ridge on the router's pre-temperature assign-skip margins. Keeps routing
    // confidence proportional to the measured per-path utility gap instead of
    // letting every margin saturate; with it, routing differences shrink on
    // paths where neither student has an edge.
    double router_ridge = 0.01;
    // Weight of the competence-calibration term: trains the competence
    // vectors to match softmax(-CE) over a co-routed path's participants, so
    // the ensemble weights track which student actually handles the path
    // better. Zero leaves the gate trained by the alignment MSE alone, which
    // drives it to uniform.
    double competence_cal = 0.1;
    // Fraction of total steps before the peer-alignment loss activates.
    // Aligning representations that are still noise teaches noise; the peer
    // term only makes sense once the students have something to teach.
    double mutual_warmup_frac = 0.0;
    int epochs = 10;
    int batch_queries = 8;
    double lr_students = 3e-4;
    double lr_aux = 1e-3;
    double tau_start = 1.0;
    double tau_end = 0.3;
    std::uint64_t seed = 1;
    // ablation flags (Table-2 arms plus the frozen-student variant)
    bool disable_quality_filter = false;
    bool disable_router = false;
    bool disable_mutual = false;
    int freeze_student = -1;
    // interpretation flags
    bool mutual_all_paths = false;
    bool mutual_raw_sum = false;
    int d_embed = 64;
    int router_hidden = 32;
    int d_shared = 32;
    double heldout_frac = 0.2;
    double train_fraction = 1.0;  // deterministic subset of training queries
    bool eval_every_epoch = false;
    int eval_max_new = 64;
    std::string checkpoint_dir;  // empty = no checkpoints written
    std::vector<StudentConfig> students;  // empty = default heterogeneous pair
};

struct StepRecord {
    int step = 0;
    double tau = 0.0;
    double alpha_bar = 0.0;  // soft mean during training
    double entropy_term = 0.0;
    double l_mutual = 0.0;
    double total = 0.0;
    std::vector<double> l_distill;  // one per student
};

struct EvalRow {
    int student = 0;
    TaskKind task = TaskKind::ModularArithmetic;
    int difficulty = 1;
    long n = 0;
    long correct = 0;
};

struct TrainResult {
    std::vector<StudentModel> students;
    RouterParams router;
    SharedSpace shared;
    std::vector<StepRecord> steps;
    std::vector<EvalRow> final_eval;
    Corpus heldout;
    Corpus cleaned_train;
    long mutual_skipped_steps = 0;
};

// Deterministic split shared across arms and seeds, so trend comparisons see
// identical held-out queries.
Corpus heldout_split(const Corpus& corpus, double frac);
Corpus training_split(const Corpus& corpus, double frac, double train_fraction);

TrainResult train(const TrainConfig& config, const Corpus& corpus);

std::vector<EvalRow> evaluate(const std::vector<StudentModel>& students, const Corpus& heldout,
                              int max_new = 64);
double overall_accuracy(const std::vector<EvalRow>& rows, int student);

struct AblationRow {
    std::string arm;
    std::uint64_t seed = 0;
    int student = 0;
    double accuracy = 0.0;
    double delta_vs_full = 0.0;
};
std::vector<AblationRow> run_ablation_matrix(const TrainConfig& base, const Corpus& corpus,
                                             const std::vector<std::uint64_t>& seeds);

struct SweepRow {
    std::string method;  // "qr_distill" or "sft"
    double fraction = 1.0;
    std::uint64_t seed = 0;
    int student = 0;
    double accuracy = 0.0;
};
std::vector<SweepRow> sample_efficiency_sweep(const TrainConfig& base, const Corpus& corpus,
                                              const std::vector<double>& fractions,
                                              const std::vector<std::uint64_t>& seeds);

// Plain-SFT arm used by the sweep: no filtering, no routing, no peer loss.
TrainConfig sft_baseline_config(TrainConfig base);

void write_metrics_csv(const std::vector<StepRecord>& steps, int n_students,
                       const std::string& path);
void write_eval_csv(const std::vector<EvalRow>& rows, const std::string& path);
void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

}  // namespace qrd
