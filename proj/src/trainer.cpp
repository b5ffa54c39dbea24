#include "qrd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <stdexcept>

#include "qrd/encoder.hpp"
#include "qrd/filter.hpp"
#include "qrd/optim.hpp"

namespace qrd {

namespace {

constexpr std::uint64_t kSplitSalt = 9999;
constexpr std::uint64_t kSubsetSalt = 777;

bool in_heldout(int qid, double frac) {
    return static_cast<double>(mix_seed(kSplitSalt, qid) % 1000000) < frac * 1000000.0;
}

void fmt(std::ofstream& out, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
}

}  // namespace

Corpus heldout_split(const Corpus& corpus, double frac) {
    Corpus out;
    for (const auto& e : corpus)
        if (in_heldout(e.query.id, frac)) out.push_back(e);
    return out;
}

Corpus training_split(const Corpus& corpus, double frac, double train_fraction) {
    Corpus train;
    for (const auto& e : corpus)
        if (!in_heldout(e.query.id, frac)) train.push_back(e);
    if (train_fraction >= 1.0) return train;
    // Deterministic subset: order queries by a salted hash, keep a prefix.
    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return mix_seed(kSubsetSalt, train[a].query.id) < mix_seed(kSubsetSalt, train[b].query.id);
    });
    size_t keep = static_cast<size_t>(std::ceil(train_fraction * train.size()));
    if (keep == 0)
        throw std::invalid_argument("training_split: fraction yields zero training queries");
    Corpus out;
    std::vector<size_t> kept(order.begin(), order.begin() + std::min(keep, order.size()));
    std::sort(kept.begin(), kept.end());
    for (size_t i : kept) out.push_back(train[i]);
    return out;
}

TrainResult train(const TrainConfig& cfg, const Corpus& corpus) {
    if (cfg.lambda1 < 0 || cfg.lambda2 < 0)
        throw std::invalid_argument("train: lambda weights must be nonnegative");

    std::vector<StudentConfig> student_cfgs =
        cfg.students.empty() ? default_student_pair(cfg.seed) : cfg.students;
    const int S = static_cast<int>(student_cfgs.size());
    if (cfg.freeze_student >= S)
        throw std::invalid_argument("train: freeze_student out of range");

    Corpus train_set = training_split(corpus, cfg.heldout_frac, cfg.train_fraction);
    Corpus heldout = heldout_split(corpus, cfg.heldout_frac);

    Corpus cleaned;
    if (cfg.disable_quality_filter) {
        cleaned = train_set;
    } else {
        auto judge = make_oracle_judge();
        cleaned = run_quality_filter(train_set, *judge).cleaned;
    }
    if (cleaned.empty()) throw std::runtime_error("train: no training queries survive filtering");

    TrainResult result;
    for (int s = 0; s < S; ++s) {
        result.students.emplace_back(student_cfgs[s], student_cfgs[s].seed);
        if (cfg.freeze_student == s) result.students.back().set_frozen(true);
    }
    PathEncoder encoder(cfg.d_embed);
    result.router = RouterParams::init(cfg.d_embed, cfg.router_hidden, S,
                                       mix_seed(cfg.seed, 0xB0));
    std::vector<int> widths;
    for (const auto& sc : student_cfgs) widths.push_back(sc.d_model);
    result.shared = SharedSpace::init(widths, cfg.d_shared, mix_seed(cfg.seed, 0x5E));

    std::vector<AdamW> student_opts;
    for (int s = 0; s < S; ++s) student_opts.emplace_back(cfg.lr_students);
    AdamW aux_opt(cfg.lr_aux);
    std::vector<Tensor> aux_params = result.router.trainable();
    for (const Tensor& t : result.shared.trainable()) aux_params.push_back(t);

    const int steps_per_epoch =
        static_cast<int>((cleaned.size() + cfg.batch_queries - 1) / cfg.batch_queries);
    const int total_steps = std::max(1, cfg.epochs * steps_per_epoch);
    int step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<size_t> order(cleaned.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0xE90C + epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        for (int b = 0; b < steps_per_epoch; ++b, ++step) {
            Corpus batch;
            for (int q = b * cfg.batch_queries;
                 q < std::min<int>((b + 1) * cfg.batch_queries, static_cast<int>(order.size()));
                 ++q)
                batch.push_back(cleaned[order[q]]);
            if (batch.empty()) continue;
            int n_paths = 0;
            for (const auto& e : batch) n_paths += static_cast<int>(e.paths.size());

            double frac = total_steps > 1 ? static_cast<double>(step) / (total_steps - 1) : 0.0;
            result.router.tau = cfg.tau_start * std::pow(cfg.tau_end / cfg.tau_start, frac);

            for (auto& st : result.students) st.zero_grad();
            for (Tensor& t : aux_params) t.zero_grad();

            // (1) encode and route with fresh noise
            RoutingDecision decision;
            bool routed = !cfg.disable_router;
            if (routed) {
                Tensor emb = encoder.encode_batch(batch);
                Tensor noise = gumbel_noise(n_paths, S, mix_seed(cfg.seed, 0xA11CE + step));
                decision = route(emb, result.router, noise);
            }

            // (2) per-student SFT. The forward pass covers every
            // (path, student) pair so the router keeps receiving a signal for
            // paths it currently rejects; otherwise rejection is
            // self-reinforcing because rejected paths produce no return
            // gradient. Students train on the plain mean cross-entropy of
            // their assigned paths only. The router gets a separate term
            // soft(p, s) * advantage(p, s), with the advantage detached and
            // double-centered (path and student main effects removed): what
            // survives the centering is the interaction "which student
            // handles this path better", which is the thing routing is
            // supposed to learn. A single-centered advantage keeps the path
            // main effect — how hard the path is for everyone — and that
            // component dwarfs the interaction, so the router degenerates
            // into a shared accept/reject list with no per-student
            // preference.
            std::vector<std::vector<Tensor>> hidden(S, std::vector<Tensor>(n_paths));
            std::vector<Tensor> l_distill(S);
            std::vector<const CorpusEntry*> path_entry(n_paths);
            std::vector<const ReasoningPath*> path_ref(n_paths);
            {
                int p = 0;
                for (const auto& e : batch)
                    for (const auto& path : e.paths) {
                        path_entry[p] = &e;
                        path_ref[p] = &path;
                        ++p;
                    }
            }
            std::vector<std::vector<double>> ce_val(S, std::vector<double>(n_paths, 0.0));
            for (int s = 0; s < S; ++s) {
                std::vector<Tensor> terms;
                for (int p = 0; p < n_paths; ++p) {
                    auto sft = result.students[s].sft_loss(path_entry[p]->query.prompt_tokens,
                                                           path_ref[p]->tokens);
                    hidden[s][p] = sft.fwd.last_hidden;
                    ce_val[s][p] = sft.loss.value();
                    if (!routed || decision.assigned(p, s)) terms.push_back(sft.loss);
                }
                if (terms.empty()) {
                    l_distill[s] = Tensor::scalar(0.0);
                } else {
                    Tensor acc = terms[0];
                    for (size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
                    l_distill[s] = scale(acc, 1.0 / static_cast<double>(terms.size()));
                }
            }
            std::vector<Tensor> guidance_terms;
            if (routed && S >= 2) {
                std::vector<double> row_mean(n_paths, 0.0), col_mean(S, 0.0);
                double grand = 0.0;
                for (int s = 0; s < S; ++s)
                    for (int p = 0; p < n_paths; ++p) {
                        row_mean[p] += ce_val[s][p] / S;
                        col_mean[s] += ce_val[s][p] / n_paths;
                        grand += ce_val[s][p] / (S * n_paths);
                    }
                for (int s = 0; s < S; ++s)
                    for (int p = 0; p < n_paths; ++p) {
                        double adv = ce_val[s][p] - row_mean[p] - col_mean[s] + grand;
                        guidance_terms.push_back(
                            scale(select(decision.soft, p * S + s), adv));
                    }
            }

            // (3) mutual pass over co-routed paths. The competence weights
            // only ever receive gradient through the alignment MSE, and that
            // loss alone is minimized by uniform weights — the "competence"
            // gate degenerates into a plain average and the ensemble stops
            // being directional. A calibration term trains the w vectors
            // (through detached projections, so representations are not
            // reshaped to flatter the gate) to match softmax(-CE) over the
            // participants: gamma then tracks which student actually
            // predicts the path better, and alignment pulls the weaker
            // participant toward the stronger one instead of averaging both
            // toward the middle.
            Tensor l_mutual = Tensor::scalar(0.0);
            std::vector<Tensor> cal_terms;
            bool mutual_active = cfg.lambda2 > 0 && !cfg.disable_mutual &&
                                 step >= cfg.mutual_warmup_frac * total_steps;
            if (mutual_active) {
                MutualBatch mb;
                for (int p = 0; p < n_paths; ++p) {
                    std::vector<int> participants;
                    for (int s = 0; s < S; ++s) {
                        bool active = cfg.mutual_all_paths ||
                                      (routed ? decision.assigned(p, s) : true);
                        if (active && hidden[s][p].valid()) participants.push_back(s);
                    }
                    if (participants.size() < 2) continue;
                    std::vector<Tensor> projected;
                    SharedSpace sub;  // views of the participating students' heads
                    sub.d_shared = result.shared.d_shared;
                    for (int s : participants) {
                        projected.push_back(project(hidden[s][p], result.shared, s));
                        sub.proj_w.push_back(result.shared.proj_w[s]);
                        sub.proj_b.push_back(result.shared.proj_b[s]);
                        sub.comp_w.push_back(result.shared.comp_w[s]);
                    }
                    Tensor gamma = competence(projected, sub);
                    // The ensemble is a fixed target within the step:
                    // participants move toward it, it does not move toward
                    // them. With a live target the high-competence student is
                    // dragged toward its weaker peers in proportion to their
                    // ensemble weight, which is backwards.
                    Tensor z_ens = detach(ensemble(projected, gamma));
                    for (size_t i = 0; i < projected.size(); ++i)
                        mb.per_pair_losses.push_back(mse(projected[i], z_ens));
                    if (cfg.competence_cal > 0) {
                        std::vector<Tensor> zdet;
                        for (const Tensor& z : projected) zdet.push_back(detach(z));
                        Tensor gcal = competence(zdet, sub);
                        double zmax = -std::numeric_limits<double>::infinity();
                        for (int s : participants) zmax = std::max(zmax, -ce_val[s][p]);
                        double denom = 0.0;
                        for (int s : participants) denom += std::exp(-ce_val[s][p] - zmax);
                        for (size_t i = 0; i < participants.size(); ++i) {
                            double target =
                                std::exp(-ce_val[participants[i]][p] - zmax) / denom;
                            Tensor diff =
                                add_scalar(select(gcal, static_cast<int>(i)), -target);
                            cal_terms.push_back(mul(diff, diff));
                        }
                    }
                }
                if (mb.per_pair_losses.empty()) ++result.mutual_skipped_steps;
                l_mutual = mutual_loss(mb, cfg.mutual_raw_sum);
            }

            // (4) full objective
            Tensor total = l_distill[0];
            for (int s = 1; s < S; ++s) total = add(total, l_distill[s]);
            Tensor entropy_term;
            if (routed) {
                Tensor h = entropy_loss(decision);
                entropy_term = scale(add_scalar(neg(h), std::log(2.0)), cfg.lambda1);
                total = add(total, entropy_term);
                if (cfg.router_ridge > 0.0)
                    total = add(total, scale(mean(mul(decision.margin, decision.margin)),
                                             cfg.router_ridge));
            }
            if (!cal_terms.empty()) {
                Tensor c = cal_terms[0];
                for (size_t i = 1; i < cal_terms.size(); ++i) c = add(c, cal_terms[i]);
                total = add(total,
                            scale(c, cfg.competence_cal /
                                         static_cast<double>(cal_terms.size())));
            }
            Tensor mutual_term;
            if (mutual_active) {
                mutual_term = scale(l_mutual, cfg.lambda2);
                total = add(total, mutual_term);
            }
            if (!guidance_terms.empty()) {
                Tensor g = guidance_terms[0];
                for (size_t i = 1; i < guidance_terms.size(); ++i) g = add(g, guidance_terms[i]);
                total = add(total, scale(g, 1.0 / static_cast<double>(guidance_terms.size())));
            }

            StepRecord rec;
            rec.step = step;
            rec.tau = result.router.tau;
            rec.alpha_bar = routed ? decision.alpha_soft.value() : 1.0;
            rec.entropy_term = entropy_term.valid() ? entropy_term.value() : 0.0;
            rec.l_mutual = l_mutual.value();
            rec.total = total.value();
            for (int s = 0; s < S; ++s) rec.l_distill.push_back(l_distill[s].value());

            if (!std::isfinite(rec.total)) {
                std::string offender = "total";
                for (int s = 0; s < S; ++s)
                    if (!std::isfinite(rec.l_distill[s]))
                        offender = "l_distill_" + std::to_string(s);
                if (!std::isfinite(rec.l_mutual)) offender = "l_mutual";
                if (!std::isfinite(rec.entropy_term)) offender = "entropy_term";
                if (!cfg.checkpoint_dir.empty()) {
                    std::filesystem::create_directories(cfg.checkpoint_dir);
                    for (int s = 0; s < S; ++s)
                        result.students[s].save(cfg.checkpoint_dir + "/last_good_student" +
                                                std::to_string(s) + ".ckpt");
                }
                throw std::runtime_error("train: non-finite loss term " + offender + " at step " +
                                         std::to_string(step));
            }

            // (5) one optimizer step for every trainable group
            backward(total);
            for (int s = 0; s < S; ++s) {
                if (result.students[s].frozen()) continue;
                student_opts[s].step(result.students[s].trainable());
                result.students[s].bump_step();
            }
            aux_opt.step(aux_params);
            result.steps.push_back(std::move(rec));
        }

        if (cfg.eval_every_epoch && !heldout.empty())
            result.final_eval = evaluate(result.students, heldout, cfg.eval_max_new);
        if (!cfg.checkpoint_dir.empty()) {
            std::filesystem::create_directories(cfg.checkpoint_dir);
            for (int s = 0; s < S; ++s)
                result.students[s].save(cfg.checkpoint_dir + "/student" + std::to_string(s) +
                                        "_epoch" + std::to_string(epoch) + ".ckpt");
        }
    }

    if (!heldout.empty()) result.final_eval = evaluate(result.students, heldout, cfg.eval_max_new);
    result.heldout = std::move(heldout);
    result.cleaned_train = std::move(cleaned);
    if (!cfg.checkpoint_dir.empty()) {
        std::filesystem::create_directories(cfg.checkpoint_dir);
        for (int s = 0; s < S; ++s)
            result.students[s].save(cfg.checkpoint_dir + "/student" + std::to_string(s) +
                                    "_final.ckpt");
        save_router(result.router, cfg.checkpoint_dir + "/router_final.ckpt");
        save_shared(result.shared, cfg.checkpoint_dir + "/shared_final.ckpt");
    }
    return result;
}

std::vector<EvalRow> evaluate(const std::vector<StudentModel>& students, const Corpus& heldout,
                              int max_new) {
    std::vector<EvalRow> rows;
    if (heldout.empty()) {
        std::cerr << "evaluate: empty held-out set\n";
        return rows;
    }
    auto find_row = [&rows](int s, TaskKind k, int diff) -> EvalRow& {
        for (auto& r : rows)
            if (r.student == s && r.task == k && r.difficulty == diff) return r;
        rows.push_back({s, k, diff, 0, 0});
        return rows.back();
    };
    for (size_t s = 0; s < students.size(); ++s) {
        for (const auto& e : heldout) {
            std::vector<int> continuation =
                students[s].greedy_decode(e.query.prompt_tokens, max_new);
            std::string ans = canonicalize_answer(extract_answer(continuation));
            EvalRow& row = find_row(static_cast<int>(s), e.query.task_kind, e.query.difficulty);
            ++row.n;
            if (!ans.empty() && ans == canonicalize_answer(e.query.ground_truth)) ++row.correct;
        }
    }
    std::sort(rows.begin(), rows.end(), [](const EvalRow& a, const EvalRow& b) {
        if (a.student != b.student) return a.student < b.student;
        if (a.task != b.task) return static_cast<int>(a.task) < static_cast<int>(b.task);
        return a.difficulty < b.difficulty;
    });
    return rows;
}

double overall_accuracy(const std::vector<EvalRow>& rows, int student) {
    long n = 0, c = 0;
    for (const auto& r : rows)
        if (r.student == student) {
            n += r.n;
            c += r.correct;
        }
    return n == 0 ? 0.0 : static_cast<double>(c) / static_cast<double>(n);
}

std::vector<AblationRow> run_ablation_matrix(const TrainConfig& base, const Corpus& corpus,
                                             const std::vector<std::uint64_t>& seeds) {
    struct Arm {
        const char* name;
        TrainConfig cfg;
    };
    std::vector<AblationRow> rows;
    for (std::uint64_t seed : seeds) {
        TrainConfig full_cfg = base;
        full_cfg.seed = seed;
        std::vector<Arm> arms;
        arms.push_back({"full", full_cfg});
        TrainConfig c = full_cfg;
        c.disable_quality_filter = true;
        arms.push_back({"wo_qf", c});
        c = full_cfg;
        c.disable_router = true;
        arms.push_back({"wo_route", c});
        c = full_cfg;
        c.disable_mutual = true;
        arms.push_back({"wo_collab", c});
        c = full_cfg;
        c.freeze_student = 1;
        arms.push_back({"frozen_b", c});

        std::vector<double> full_acc;
        for (const auto& arm : arms) {
            TrainResult r = train(arm.cfg, corpus);
            int S = static_cast<int>(r.students.size());
            for (int s = 0; s < S; ++s) {
                double acc = overall_accuracy(r.final_eval, s);
                if (std::string(arm.name) == "full") full_acc.push_back(acc);
                rows.push_back({arm.name, seed, s, acc,
                                acc - (s < static_cast<int>(full_acc.size()) ? full_acc[s] : 0.0)});
            }
        }
    }
    return rows;
}

TrainConfig sft_baseline_config(TrainConfig base) {
    base.disable_quality_filter = true;
    base.disable_router = true;
    base.disable_mutual = true;
    base.lambda1 = 0.0;
    base.lambda2 = 0.0;
    return base;
}

std::vector<SweepRow> sample_efficiency_sweep(const TrainConfig& base, const Corpus& corpus,
                                              const std::vector<double>& fractions,
                                              const std::vector<std::uint64_t>& seeds) {
    std::vector<SweepRow> rows;
    for (std::uint64_t seed : seeds) {
        for (double f : fractions) {
            for (const char* method : {"qr_distill", "sft"}) {
                TrainConfig cfg = std::string(method) == "sft" ? sft_baseline_config(base) : base;
                cfg.seed = seed;
                cfg.train_fraction = f;
                TrainResult r = train(cfg, corpus);
                for (size_t s = 0; s < r.students.size(); ++s)
                    rows.push_back({method, f, seed, static_cast<int>(s),
                                    overall_accuracy(r.final_eval, static_cast<int>(s))});
            }
        }
    }
    return rows;
}

void write_metrics_csv(const std::vector<StepRecord>& steps, int n_students,
                       const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write metrics csv: " + path);
    out << "step,tau,alpha_bar,entropy_term,l_mutual,total";
    for (int s = 0; s < n_students; ++s) out << ",l_distill_" << s;
    out << "\n";
    for (const auto& r : steps) {
        out << r.step << ",";
        fmt(out, r.tau);
        out << ",";
        fmt(out, r.alpha_bar);
        out << ",";
        fmt(out, r.entropy_term);
        out << ",";
        fmt(out, r.l_mutual);
        out << ",";
        fmt(out, r.total);
        for (double v : r.l_distill) {
            out << ",";
            fmt(out, v);
        }
        out << "\n";
    }
}

void write_eval_csv(const std::vector<EvalRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write eval csv: " + path);
    out << "student,task_kind,difficulty,n,correct,accuracy\n";
    for (const auto& r : rows) {
        out << r.student << "," << to_string(r.task) << "," << r.difficulty << "," << r.n << ","
            << r.correct << ",";
        fmt(out, r.n ? static_cast<double>(r.correct) / r.n : 0.0);
        out << "\n";
    }
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write ablation csv: " + path);
    out << "arm,seed,student,accuracy,delta_vs_full\n";
    for (const auto& r : rows) {
        out << r.arm << "," << r.seed << "," << r.student << ",";
        fmt(out, r.accuracy);
        out << ",";
        fmt(out, r.delta_vs_full);
        out << "\n";
    }
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write sweep csv: " + path);
    out << "method,fraction,seed,student,accuracy\n";
    for (const auto& r : rows) {
        out << r.method << ",";
        fmt(out, r.fraction);
        out << "," << r.seed << "," << r.student << ",";
        fmt(out, r.accuracy);
        out << "\n";
    }
}

}  // namespace qrd
