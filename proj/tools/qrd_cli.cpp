#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qrd/config.hpp"
#include "qrd/corpus.hpp"
#include "qrd/encoder.hpp"
#include "qrd/filter.hpp"
#include "qrd/manifest.hpp"
#include "qrd/router.hpp"
#include "qrd/teacher.hpp"
#include "qrd/trainer.hpp"

namespace {

// Input/configuration problems exit 1; runtime failures exit 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_file(const std::string& path, const std::string& what) {
    if (!std::filesystem::exists(path))
        throw UsageError("missing " + what + ": " + path);
}

qrd::ConfigFile load_config(const std::string& path) {
    if (path.empty()) return {};
    require_file(path, "config file");
    try {
        return qrd::ConfigFile::load(path);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
}

// Re-tags config interpretation failures (bad values, unknown keys) as usage
// errors so they exit 1 rather than 2.
template <typename F>
auto config_scope(F&& f) {
    try {
        return f();
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
}

qrd::Corpus load_corpus(const std::string& path) {
    require_file(path, "corpus file");
    try {
        return qrd::read_corpus(path);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
}

struct CommonArgs {
    std::string config;
    std::uint64_t seed = 1;
    std::string out = "out";
    std::string corpus;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool needs_corpus) {
    cmd->add_option("--config", a.config, "flat key=value config file");
    cmd->add_option("--seed", a.seed, "base RNG seed");
    cmd->add_option("--out", a.out, "output directory");
    auto* c = cmd->add_option("--corpus", a.corpus, "input corpus (JSONL)");
    if (needs_corpus) c->required();
}

qrd::RunManifest base_manifest(const std::string& command, const CommonArgs& a) {
    qrd::RunManifest m;
    m.command = command;
    m.config_path = a.config;
    if (!a.config.empty()) m.config_hash = qrd::file_hash_hex(a.config);
    m.corpus_path = a.corpus;
    if (!a.corpus.empty()) m.corpus_hash = qrd::file_hash_hex(a.corpus);
    m.seed = a.seed;
    m.timestamp_utc = qrd::utc_timestamp_now();
    return m;
}

void finish_manifest(qrd::RunManifest m, const std::string& out_dir) {
    qrd::write_manifest(m, out_dir + "/manifest.json");
}

std::unique_ptr<qrd::Judge> judge_from_choice(const std::string& choice) {
    if (choice == "external") {
        const char* ep = std::getenv("JUDGE_ENDPOINT");
        if (!ep || !*ep) throw UsageError("judge 'external' requires JUDGE_ENDPOINT");
        qrd::HttpTeacherConfig hc;
        hc.endpoint = ep;
        if (const char* tok = std::getenv("JUDGE_TOKEN")) hc.auth_token = tok;
        auto client = std::shared_ptr<qrd::TeacherClient>(qrd::make_http_teacher(hc));
        return qrd::make_external_judge(client);
    }
    try {
        return qrd::make_judge(choice);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
}

std::vector<std::uint64_t> seed_triple(std::uint64_t base) {
    return {base, base + 1, base + 2};
}

int cmd_generate(const CommonArgs& a) {
    auto cfg = load_config(a.config);
    qrd::CorpusConfig cc = config_scope([&] { return qrd::corpus_config_from(cfg); });
    config_scope([&] { cfg.reject_unknown(); });
    std::filesystem::create_directories(a.out);
    qrd::Corpus corpus = qrd::generate_corpus(cc, a.seed);
    std::string path = a.out + "/corpus.jsonl";
    qrd::write_corpus(corpus, path);
    auto m = base_manifest("generate", a);
    m.outputs["corpus"] = path;
    m.corpus_path = path;
    m.corpus_hash = qrd::file_hash_hex(path);
    finish_manifest(m, a.out);
    std::cout << "generated " << corpus.size() << " queries -> " << path << "\n";
    return 0;
}

int cmd_filter(const CommonArgs& a, const std::string& judge_choice) {
    auto cfg = load_config(a.config);
    config_scope([&] { cfg.reject_unknown(); });
    qrd::Corpus corpus = load_corpus(a.corpus);
    auto judge = judge_from_choice(judge_choice);
    std::filesystem::create_directories(a.out);
    qrd::FilterResult res = qrd::run_quality_filter(corpus, *judge);
    std::string cleaned_path = a.out + "/cleaned.jsonl";
    std::string report_path = a.out + "/filter_report.jsonl";
    qrd::write_corpus(res.cleaned, cleaned_path);
    qrd::write_filter_report(res.report, report_path);
    auto m = base_manifest("filter", a);
    m.flags.push_back("judge=" + judge_choice);
    m.outputs["cleaned_corpus"] = cleaned_path;
    m.outputs["filter_report"] = report_path;
    finish_manifest(m, a.out);
    std::cout << "retained " << res.report.retained << "/" << res.report.input << " paths ("
              << res.report.removed_wrong_answer << " wrong-answer, "
              << res.report.removed_spurious << " spurious)\n";
    return 0;
}

qrd::TrainConfig train_config_for(const CommonArgs& a, qrd::ConfigFile& cfg, bool no_qf,
                                  bool no_route, bool no_collab, int freeze) {
    qrd::TrainConfig tc = config_scope([&] { return qrd::train_config_from(cfg); });
    tc.seed = a.seed;
    tc.disable_quality_filter = no_qf;
    tc.disable_router = no_route;
    tc.disable_mutual = no_collab;
    tc.freeze_student = freeze;
    return tc;
}

void push_ablation_flags(qrd::RunManifest& m, const qrd::TrainConfig& tc) {
    if (tc.disable_quality_filter) m.flags.push_back("no-qf");
    if (tc.disable_router) m.flags.push_back("no-route");
    if (tc.disable_mutual) m.flags.push_back("no-collab");
    if (tc.freeze_student >= 0)
        m.flags.push_back("freeze=" + std::to_string(tc.freeze_student));
}

int cmd_train(const CommonArgs& a, bool no_qf, bool no_route, bool no_collab, int freeze) {
    auto cfg = load_config(a.config);
    qrd::TrainConfig tc = train_config_for(a, cfg, no_qf, no_route, no_collab, freeze);
    config_scope([&] { cfg.reject_unknown(); });
    qrd::Corpus corpus = load_corpus(a.corpus);
    std::filesystem::create_directories(a.out);
    tc.checkpoint_dir = a.out + "/checkpoints";
    qrd::TrainResult res = qrd::train(tc, corpus);
    std::string metrics_path = a.out + "/metrics.csv";
    std::string eval_path = a.out + "/eval.csv";
    qrd::write_metrics_csv(res.steps, static_cast<int>(res.students.size()), metrics_path);
    qrd::write_eval_csv(res.final_eval, eval_path);
    auto m = base_manifest("train", a);
    push_ablation_flags(m, tc);
    m.outputs["metrics"] = metrics_path;
    m.outputs["eval"] = eval_path;
    m.outputs["checkpoints"] = tc.checkpoint_dir;
    finish_manifest(m, a.out);
    for (size_t s = 0; s < res.students.size(); ++s)
        std::cout << "student " << s << " held-out accuracy "
                  << qrd::overall_accuracy(res.final_eval, static_cast<int>(s)) << "\n";
    return 0;
}

int cmd_evaluate(const CommonArgs& a, const std::string& ckpt_dir, int max_new) {
    auto cfg = load_config(a.config);
    config_scope([&] { cfg.reject_unknown(); });
    qrd::Corpus corpus = load_corpus(a.corpus);
    require_file(ckpt_dir, "checkpoint directory");
    std::vector<qrd::StudentModel> students;
    for (int s = 0;; ++s) {
        std::string path = ckpt_dir + "/student" + std::to_string(s) + "_final.ckpt";
        if (!std::filesystem::exists(path)) break;
        students.push_back(qrd::StudentModel::load(path));
    }
    if (students.empty())
        throw UsageError("no student*_final.ckpt files under " + ckpt_dir);
    std::filesystem::create_directories(a.out);
    auto rows = qrd::evaluate(students, corpus, max_new);
    std::string eval_path = a.out + "/eval.csv";
    qrd::write_eval_csv(rows, eval_path);
    auto m = base_manifest("evaluate", a);
    m.outputs["eval"] = eval_path;
    m.flags.push_back("ckpt=" + ckpt_dir);
    finish_manifest(m, a.out);
    for (size_t s = 0; s < students.size(); ++s)
        std::cout << "student " << s << " accuracy "
                  << qrd::overall_accuracy(rows, static_cast<int>(s)) << "\n";
    return 0;
}

int cmd_ablate(const CommonArgs& a) {
    auto cfg = load_config(a.config);
    qrd::TrainConfig tc = train_config_for(a, cfg, false, false, false, -1);
    std::vector<double> seed_list =
        cfg.get_double_list("ablate.seeds", {static_cast<double>(a.seed),
                                             static_cast<double>(a.seed + 1),
                                             static_cast<double>(a.seed + 2)});
    config_scope([&] { cfg.reject_unknown(); });
    qrd::Corpus corpus = load_corpus(a.corpus);
    std::vector<std::uint64_t> seeds;
    for (double s : seed_list) seeds.push_back(static_cast<std::uint64_t>(s));
    std::filesystem::create_directories(a.out);
    auto rows = qrd::run_ablation_matrix(tc, corpus, seeds);
    std::string path = a.out + "/ablation.csv";
    qrd::write_ablation_csv(rows, path);
    auto m = base_manifest("ablate", a);
    m.outputs["ablation"] = path;
    finish_manifest(m, a.out);
    std::cout << "wrote " << rows.size() << " ablation rows -> " << path << "\n";
    return 0;
}

int cmd_sweep(const CommonArgs& a) {
    auto cfg = load_config(a.config);
    qrd::TrainConfig tc = train_config_for(a, cfg, false, false, false, -1);
    std::vector<double> fractions = cfg.get_double_list("sweep.fractions", {0.1, 0.3, 0.6, 1.0});
    std::vector<double> seed_list =
        cfg.get_double_list("sweep.seeds", {static_cast<double>(a.seed),
                                            static_cast<double>(a.seed + 1),
                                            static_cast<double>(a.seed + 2)});
    config_scope([&] { cfg.reject_unknown(); });
    qrd::Corpus corpus = load_corpus(a.corpus);
    std::vector<std::uint64_t> seeds;
    for (double s : seed_list) seeds.push_back(static_cast<std::uint64_t>(s));
    std::filesystem::create_directories(a.out);
    auto rows = qrd::sample_efficiency_sweep(tc, corpus, fractions, seeds);
    std::string path = a.out + "/sweep.csv";
    qrd::write_sweep_csv(rows, path);
    auto m = base_manifest("sweep", a);
    m.outputs["sweep"] = path;
    finish_manifest(m, a.out);
    std::cout << "wrote " << rows.size() << " sweep rows -> " << path << "\n";
    return 0;
}

int cmd_report(const CommonArgs& a, const std::string& ckpt_dir) {
    auto cfg = load_config(a.config);
    int d_embed = static_cast<int>(cfg.get_int("train.d_embed", qrd::kEncoderDefaultDim));
    config_scope([&] { cfg.reject_unknown(); });
    qrd::Corpus corpus = load_corpus(a.corpus);
    std::string router_path = ckpt_dir + "/router_final.ckpt";
    require_file(router_path, "router checkpoint");
    qrd::RouterParams router = qrd::load_router(router_path);
    qrd::PathEncoder encoder(d_embed);
    qrd::Tensor emb = encoder.encode_batch(corpus);
    // Noise-free routing so the report is a deterministic read of the router.
    qrd::RoutingDecision dec =
        qrd::route(emb, router, qrd::zero_noise(emb.rows(), router.n_students));
    std::filesystem::create_directories(a.out);
    std::string by_style = a.out + "/selection_by_style.csv";
    std::string by_diff = a.out + "/selection_by_difficulty.csv";
    qrd::write_selection_rates(qrd::selection_rates(corpus, dec, qrd::GroupBy::Style), by_style);
    qrd::write_selection_rates(qrd::selection_rates(corpus, dec, qrd::GroupBy::Difficulty),
                               by_diff);
    auto m = base_manifest("report", a);
    m.outputs["selection_by_style"] = by_style;
    m.outputs["selection_by_difficulty"] = by_diff;
    m.flags.push_back("ckpt=" + ckpt_dir);
    finish_manifest(m, a.out);
    std::cout << "wrote selection-rate reports -> " << a.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qrd: multi-style reasoning-path distillation pipeline"};
    app.require_subcommand(1);

    CommonArgs gen_a, fil_a, trn_a, evl_a, abl_a, swp_a, rep_a;
    std::string judge_choice = "oracle";
    bool no_qf = false, no_route = false, no_collab = false;
    int freeze = -1;
    std::string eval_ckpt, report_ckpt;
    int eval_max_new = 64;

    auto* gen = app.add_subcommand("generate", "generate a synthetic corpus");
    add_common(gen, gen_a, false);

    auto* fil = app.add_subcommand("filter", "quality-filter a corpus");
    add_common(fil, fil_a, true);
    fil->add_option("--judge", judge_choice, "oracle | heuristic | external")
        ->check(CLI::IsMember({"oracle", "heuristic", "external"}));

    auto* trn = app.add_subcommand("train", "train students, router and shared space");
    add_common(trn, trn_a, true);
    trn->add_flag("--no-qf", no_qf, "disable quality filtering");
    trn->add_flag("--no-route", no_route, "disable routing (all paths to all students)");
    trn->add_flag("--no-collab", no_collab, "disable mutual distillation");
    trn->add_option("--freeze", freeze, "freeze this student id during training");

    auto* evl = app.add_subcommand("evaluate", "greedy-decode accuracy on a corpus");
    add_common(evl, evl_a, true);
    evl->add_option("--ckpt", eval_ckpt, "checkpoint directory from a train run")->required();
    evl->add_option("--max-new", eval_max_new, "max generated tokens per query");

    auto* abl = app.add_subcommand("ablate", "run the ablation arm matrix");
    add_common(abl, abl_a, true);

    auto* swp = app.add_subcommand("sweep", "sample-efficiency sweep vs plain SFT");
    add_common(swp, swp_a, true);

    auto* rep = app.add_subcommand("report", "selection-rate reports from a trained router");
    add_common(rep, rep_a, true);
    rep->add_option("--ckpt", report_ckpt, "checkpoint directory from a train run")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (gen->parsed()) return cmd_generate(gen_a);
        if (fil->parsed()) return cmd_filter(fil_a, judge_choice);
        if (trn->parsed()) return cmd_train(trn_a, no_qf, no_route, no_collab, freeze);
        if (evl->parsed()) return cmd_evaluate(evl_a, eval_ckpt, eval_max_new);
        if (abl->parsed()) return cmd_ablate(abl_a);
        if (swp->parsed()) return cmd_sweep(swp_a);
        if (rep->parsed()) return cmd_report(rep_a, report_ckpt);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
