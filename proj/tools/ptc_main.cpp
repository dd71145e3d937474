#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ptc/augment.hpp"
#include "ptc/checkpoint.hpp"
#include "ptc/config.hpp"
#include "ptc/contrast.hpp"
#include "ptc/data.hpp"
#include "ptc/grad_check.hpp"
#include "ptc/log.hpp"
#include "ptc/metrics.hpp"
#include "ptc/model.hpp"
#include "ptc/synth.hpp"
#include "ptc/trainer.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config;
  std::string out = "out";
  std::string mode;
  std::uint64_t seed = 0;
  std::vector<std::string> sets;
};

void add_common(CLI::App* sub, CommonFlags& f, bool with_mode_seed) {
  sub->add_option("--config", f.config, "JSON config file");
  sub->add_option("--out", f.out, "output directory (default: out)");
  sub->add_option("--set", f.sets,
                  "config override as dotted.path=value (repeatable)");
  if (with_mode_seed) {
    sub->add_option("--mode", f.mode,
                    "training mode: pt | dropout-only | moco-no-pseudo");
    sub->add_option("--seed", f.seed, "training seed");
  }
}

nlohmann::json resolve_json(const CLI::App* sub, const CommonFlags& f) {
  nlohmann::json j = f.config.empty() ? nlohmann::json::object()
                                      : ptc::load_config_json(f.config);
  for (const auto& s : f.sets) ptc::apply_override(j, s);
  const auto* mode_opt = sub->get_option_no_throw("--mode");
  if (mode_opt && mode_opt->count())
    ptc::apply_override(j, "train.mode=" + f.mode);
  const auto* seed_opt = sub->get_option_no_throw("--seed");
  if (seed_opt && seed_opt->count())
    ptc::apply_override(j, "train.seed=" + std::to_string(f.seed));
  return j;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const ptc::RunConfig& cfg,
                    const nlohmann::json& args = nlohmann::json::object()) {
  fs::create_directories(out_dir);
  auto j = ptc::config_to_json(cfg);
  j["command"] = command;
  j["format_versions"] = {{"checkpoint", ptc::kCheckpointVersion},
                          {"config", 1}};
  if (!args.empty()) j["args"] = args;
  std::ofstream out(fs::path(out_dir) / "manifest.json", std::ios::trunc);
  if (!out) throw ptc::InputError("cannot write manifest under " + out_dir);
  out << j.dump(2) << '\n';
}

int cmd_train(const CLI::App* sub, const CommonFlags& f) {
  auto cfg = ptc::config_from_json(resolve_json(sub, f));
  cfg.validate();
  if (cfg.train_corpus.empty())
    throw ptc::ParameterError("train requires data.train_corpus");
  if (cfg.eval_pairs.empty())
    throw ptc::ParameterError("train requires data.eval_pairs");
  auto corpus = ptc::load_corpus(cfg.train_corpus);
  auto pairs = ptc::load_scored_pairs(cfg.eval_pairs);
  write_manifest(f.out, "train", cfg);
  auto outcome = ptc::train_run<double>(cfg, corpus, pairs, f.out);
  std::cout << "epochs " << outcome.epoch_mean_loss.size() << ", final loss "
            << ptc::format_double(outcome.epoch_mean_loss.back())
            << ", final spearman "
            << ptc::format_double(outcome.final_backbone.spearman)
            << ", best spearman " << ptc::format_double(outcome.best_spearman)
            << "\n";
  std::cout << "outputs under " << f.out << "\n";
  return 0;
}

int cmd_evaluate(const CLI::App* sub, const CommonFlags& f,
                 const std::string& checkpoint, const std::string& vocab_path,
                 const std::string& pairs_path, const std::string& source_str) {
  auto cfg = ptc::config_from_json(resolve_json(sub, f));
  cfg.validate();
  ptc::EmbeddingSource source;
  if (source_str == "backbone") {
    source = ptc::EmbeddingSource::backbone;
  } else if (source_str == "pseudo-mapped") {
    source = ptc::EmbeddingSource::pseudo_mapped;
  } else {
    throw ptc::ParameterError("unknown --source '" + source_str +
                              "' (expected backbone or pseudo-mapped)");
  }
  auto vocab = ptc::Vocabulary::load(vocab_path);
  auto pairs = ptc::load_scored_pairs(pairs_path);
  ptc::EncoderConfig enc_cfg = cfg.encoder;
  enc_cfg.vocab_size = vocab.size();
  auto model =
      ptc::PtModel<double>::init(enc_cfg, cfg.train.pseudo_len, cfg.train.seed);
  ptc::load_checkpoint_into(checkpoint, model.named());
  auto report = ptc::evaluate_sts(pairs, model, vocab, source, 4.0, checkpoint);
  write_manifest(f.out, "evaluate", cfg,
                 {{"checkpoint", checkpoint},
                  {"vocab", vocab_path},
                  {"pairs", pairs_path},
                  {"source", source_str}});
  const std::string report_path =
      (fs::path(f.out) / ("report-" + source_str + ".json")).string();
  ptc::detail::write_report_file(report_path, report);
  std::cout << "spearman " << ptc::format_double(report.spearman)
            << ", alignment " << ptc::format_double(report.alignment)
            << ", uniformity " << ptc::format_double(report.uniformity)
            << " (" << report.source << ")\n";
  std::cout << "report at " << report_path << "\n";
  return 0;
}

int cmd_grad_check(const CommonFlags& f) {
  // tiny fixed instance: two-layer encoder, pseudo head, one queue negative
  auto vocab = ptc::Vocabulary::build({"p q r s t u v w"}, 1);
  ptc::EncoderConfig cfg;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.d_model = 8;
  cfg.d_ff = 16;
  cfg.max_len = 8;
  cfg.dropout = 0.1;
  cfg.vocab_size = vocab.size();
  auto model = ptc::PtModel<double>::init(cfg, 4, 31);
  model.set_requires_grad(true);
  auto momentum = ptc::MomentumState<double>::from(model, false);
  auto batch = ptc::tokenize_batch({"p q r s t", "u v w p q"}, vocab, 8);

  ptc::EmbeddingQueue<double> queue(4, cfg.d_model);
  std::vector<double> neg = {1, -1, 2, 0.5, -0.25, 1.5, -2, 0.75};
  double nrm = ptc::l2_norm<double>(neg);
  for (double& x : neg) x /= nrm;
  queue.push(neg);

  // unit temperature keeps the loss at unit scale, where central differences
  // resolve 1e-5 relative error
  const double tau = 1.0;
  auto h_pos = ptc::embed_batch(batch, momentum.encoder, cfg, model.pseudo,
                                model.shared, true,
                                ptc::EncodeMode::train(202));
  auto forward = [&](ptc::Tape<double>* tape) {
    auto h =
        ptc::embed_batch(batch, model.encoder, cfg, model.pseudo, model.shared,
                         true, ptc::EncodeMode::train(101), tape);
    return ptc::info_nce_loss(h, h_pos, queue, tau, tape);
  };
  auto report = ptc::grad_check<double>(forward, model.named(), 1e-5, 1e-5);

  std::string line;
  if (report.pass) {
    line = "PASS, max relative error < 1e-5 (worst " +
           ptc::format_double(report.max_rel_error) + " at " +
           report.worst_param + "[" + std::to_string(report.worst_index) +
           "], " + std::to_string(report.entries_checked) +
           " entries checked)";
  } else {
    line = "FAIL, max relative error " +
           ptc::format_double(report.max_rel_error) + " at " +
           report.worst_param + "[" + std::to_string(report.worst_index) +
           "] (analytic " + ptc::format_double(report.analytic_at_worst) +
           ", numeric " + ptc::format_double(report.numeric_at_worst) + ")";
  }
  std::cout << line << "\n";
  fs::create_directories(f.out);
  std::ofstream out(fs::path(f.out) / "grad-check.txt", std::ios::trunc);
  out << line << '\n';
  return report.pass ? 0 : 1;
}

int cmd_mine(const CLI::App* sub, const CommonFlags& f,
             const std::string& pairs_path, ptc::HardPairCriteria criteria) {
  auto cfg = ptc::config_from_json(resolve_json(sub, f));
  auto pairs = ptc::load_scored_pairs(pairs_path);
  auto [kept, summary] = ptc::mine_hard_pairs(pairs, criteria);
  write_manifest(f.out, "mine-hard-pairs", cfg,
                 {{"pairs", pairs_path},
                  {"positive_min_gold", criteria.positive_min_gold},
                  {"negative_max_gold", criteria.negative_max_gold},
                  {"positive_min_len_diff", criteria.positive_min_len_diff},
                  {"negative_max_len_diff", criteria.negative_max_len_diff}});
  ptc::save_scored_pairs((fs::path(f.out) / "hard-pairs.tsv").string(), kept);
  const std::string line = "input " + std::to_string(summary.input_count) +
                           "\thard_positive " +
                           std::to_string(summary.hard_positive) +
                           "\thard_negative " +
                           std::to_string(summary.hard_negative);
  std::ofstream sfile(fs::path(f.out) / "mining-summary.txt", std::ios::trunc);
  sfile << line << '\n';
  std::cout << line << "\n";
  return 0;
}

int cmd_augment(const CLI::App* sub, const CommonFlags& f,
                const std::string& corpus_path, const std::string& kind_str,
                double rate, std::uint64_t aug_seed) {
  auto cfg = ptc::config_from_json(resolve_json(sub, f));
  const auto kind = ptc::parse_augment_kind(kind_str);
  auto corpus = ptc::load_corpus(corpus_path);
  std::vector<std::string> augmented;
  augmented.reserve(corpus.size());
  for (const auto& s : corpus)
    augmented.push_back(ptc::discrete_augment(s, kind, rate, aug_seed));
  write_manifest(f.out, "augment", cfg,
                 {{"corpus", corpus_path},
                  {"kind", kind_str},
                  {"rate", rate},
                  {"aug_seed", aug_seed}});
  ptc::save_corpus((fs::path(f.out) / "augmented.txt").string(), augmented);
  std::cout << "augmented " << augmented.size() << " sentences\n";
  return 0;
}

int cmd_synth(const CLI::App* sub, const CommonFlags& f) {
  auto cfg = ptc::config_from_json(resolve_json(sub, f));
  cfg.synth.validate();
  auto corpus = ptc::generate_synthetic_corpus(cfg.synth);
  write_manifest(f.out, "synth-gen", cfg);
  ptc::save_corpus((fs::path(f.out) / "train.txt").string(), corpus.train);
  ptc::save_scored_pairs((fs::path(f.out) / "eval-hard.tsv").string(),
                         corpus.eval_hard);
  ptc::save_scored_pairs((fs::path(f.out) / "eval-easy.tsv").string(),
                         corpus.eval_easy);
  std::cout << "train " << corpus.train.size() << ", eval-hard "
            << corpus.eval_hard.size() << ", eval-easy "
            << corpus.eval_easy.size() << "\n";
  return 0;
}

int dispatch(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ptc::ParameterError& e) {
    std::cerr << "parameter error: " << e.what() << "\n";
    return 3;
  } catch (const ptc::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 4;
  } catch (const ptc::DegenerateInputError& e) {
    std::cerr << "degenerate input: " << e.what() << "\n";
    return 5;
  } catch (const ptc::ContractError& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return 5;
  } catch (const ptc::ShapeError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return 5;
  } catch (const ptc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pseudo-token contrastive sentence embeddings"};
  app.require_subcommand(1);

  CommonFlags f;

  auto* train = app.add_subcommand("train", "run the contrastive loop");
  add_common(train, f, true);

  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint");
  add_common(evaluate, f, true);
  std::string checkpoint, vocab_path, pairs_path, source_str = "backbone";
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint file")
      ->required();
  evaluate->add_option("--vocab", vocab_path, "vocabulary file")->required();
  evaluate->add_option("--pairs", pairs_path, "scored pair file")->required();
  evaluate->add_option("--source", source_str,
                       "embedding source: backbone | pseudo-mapped");

  auto* gradcheck =
      app.add_subcommand("grad-check", "finite-difference gradient audit");
  add_common(gradcheck, f, false);

  auto* mine = app.add_subcommand("mine-hard-pairs",
                                  "filter scored pairs to the hard subset");
  add_common(mine, f, false);
  std::string mine_pairs;
  ptc::HardPairCriteria criteria;
  mine->add_option("--pairs", mine_pairs, "scored pair file")->required();
  mine->add_option("--positive-min-gold", criteria.positive_min_gold,
                   "gold floor for hard positives");
  mine->add_option("--negative-max-gold", criteria.negative_max_gold,
                   "gold ceiling for hard negatives");
  mine->add_option("--positive-min-len-diff", criteria.positive_min_len_diff,
                   "word-length gap floor for hard positives");
  mine->add_option("--negative-max-len-diff", criteria.negative_max_len_diff,
                   "word-length gap ceiling for hard negatives");

  auto* augment = app.add_subcommand("augment", "discrete text augmentation");
  add_common(augment, f, false);
  std::string aug_corpus, kind_str;
  double rate = 0.1;
  std::uint64_t aug_seed = 0;
  augment->add_option("--corpus", aug_corpus, "input corpus")->required();
  augment->add_option("--kind", kind_str,
                      "reorder | deletion | duplication")->required();
  augment->add_option("--rate", rate, "augmentation rate");
  augment->add_option("--aug-seed", aug_seed, "augmentation seed");

  auto* synth = app.add_subcommand(
      "synth-gen", "generate the length-confounded synthetic corpus");
  add_common(synth, f, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (train->parsed()) return dispatch([&] { return cmd_train(train, f); });
  if (evaluate->parsed())
    return dispatch([&] {
      return cmd_evaluate(evaluate, f, checkpoint, vocab_path, pairs_path,
                          source_str);
    });
  if (gradcheck->parsed()) return dispatch([&] { return cmd_grad_check(f); });
  if (mine->parsed())
    return dispatch([&] { return cmd_mine(mine, f, mine_pairs, criteria); });
  if (augment->parsed())
    return dispatch([&] {
      return cmd_augment(augment, f, aug_corpus, kind_str, rate, aug_seed);
    });
  if (synth->parsed()) return dispatch([&] { return cmd_synth(synth, f); });
  return 2;
}
