// SPDX-License-Identifier: Apache-2.0
#include "rlpeft/harness/runner.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rlpeft/errors.hpp"
#include "rlpeft/harness/checkpoint.hpp"
#include "rlpeft/spectra/spectra.hpp"
#include "rlpeft/util/csv.hpp"

namespace rlpeft::harness {

namespace fs = std::filesystem;
using util::format_double;

std::unique_ptr<policy::PolicyNet> build_policy(const ExperimentConfig& cfg) {
  const Rng root(cfg.seed);
  Rng init = root.substream("init");
  auto net = std::make_unique<policy::PolicyNet>(cfg.policy, init);
  rlvr::warm_start(*net, cfg.task.family, cfg.task.difficulty, cfg.warm_start, root.substream("warm_start"));
  Rng attach = root.substream("attach");
  net->attach(cfg.adapter, attach);
  return net;
}

std::vector<tasks::TaskInstance> training_batch(const ExperimentConfig& cfg, std::size_t step) {
  Rng rng = Rng(cfg.seed).substream("prompts", step);
  std::vector<tasks::TaskInstance> batch;
  for (std::size_t b = 0; b < cfg.batch_size; ++b) {
    batch.push_back(tasks::gen_instance(cfg.task.family, cfg.task.difficulty, rng));
  }
  return batch;
}

namespace {

void write_text(const fs::path& path, const std::string& text) { write_file(path, text); }

adapters::AdapterConfig resolved_adapter(const ExperimentConfig& cfg) {
  adapters::AdapterConfig a = cfg.adapter;
  if (a.kind == adapters::AdapterKind::kAdaLoRA && a.adalora_t_final == 0) {
    a.adalora_t_init = cfg.steps / 10;
    a.adalora_t_final = cfg.steps / 2;
  }
  return a;
}

}  // namespace

TrainResult run_train(const ExperimentConfig& input) {
  ExperimentConfig cfg = input;
  cfg.adapter = resolved_adapter(cfg);
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  auto net = build_policy(cfg);
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);

  TrainResult res;
  const auto count = adapters::count_parameters(net->parameters());
  res.trainable_fraction = count.fraction();
  res.trainable_params = count.trainable;
  res.total_params = count.total;
  res.initial_checkpoint = out / "ckpt_initial.perl";
  res.final_checkpoint = out / "ckpt_final.perl";
  res.metrics = out / "metrics.csv";
  save_checkpoint(*net, cfg, res.initial_checkpoint);

  std::ostringstream csv;
  csv << "step,mean_reward,loss,grad_norm,skipped,groups_used,trainable_fraction";
  for (const auto* l : std::as_const(*net).linears()) csv << ",dW_" << l->name();
  csv << '\n';

  rlvr::Trainer trainer(*net, cfg.rlvr);
  const Rng root(cfg.seed);
  double window = 0.0;
  std::vector<double> recent;
  for (std::size_t s = 0; s < cfg.steps; ++s) {
    const auto batch = training_batch(cfg, s);
    rlvr::StepReport r = trainer.step(batch, root.substream("step", s));
    csv << r.step << ',' << format_double(r.mean_reward) << ',' << format_double(r.loss) << ','
        << format_double(r.grad_norm) << ',' << (r.skipped ? 1 : 0) << ',' << r.groups_used << ','
        << format_double(res.trainable_fraction);
    for (double d : r.delta_norms) csv << ',' << format_double(d);
    csv << '\n';
    recent.push_back(r.mean_reward);
    window += r.mean_reward;
    if (recent.size() > cfg.stop_window) window -= recent[recent.size() - 1 - cfg.stop_window];
    res.reports.push_back(std::move(r));
    if (cfg.stop_reward > 0.0 && recent.size() >= cfg.stop_window &&
        window / static_cast<double>(cfg.stop_window) > cfg.stop_reward) {
      break;
    }
  }
  write_text(res.metrics, csv.str());
  save_checkpoint(*net, cfg, res.final_checkpoint);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cerr << cfg.name << ": " << res.reports.size() << " steps in " << secs << " s\n";
  return res;
}

rollout::BenchmarkSummary evaluate(const policy::PolicyNet& net, const ExperimentConfig& cfg,
                                   std::vector<rollout::EvalRecord>* records) {
  const Rng root(cfg.eval.seed);
  Rng instances = root.substream("eval_instances");
  const policy::SamplingParams sp{cfg.eval.temperature, cfg.eval.top_p, cfg.rlvr.max_new};
  std::vector<rollout::EvalRecord> recs;
  for (std::size_t i = 0; i < cfg.eval.instances; ++i) {
    const auto inst = tasks::gen_instance(cfg.task.family, cfg.task.difficulty, instances);
    recs.push_back(rollout::generate_group(net, inst, i, cfg.eval.k, sp, root.substream("eval", i)));
  }
  const auto summary = rollout::aggregate(recs);
  if (records) *records = std::move(recs);
  return summary;
}

rollout::BenchmarkSummary run_eval(const fs::path& checkpoint, const ExperimentConfig& cfg) {
  const LoadedCheckpoint ck = load_checkpoint(checkpoint);
  if (ck.config.policy.vocab < tasks::vocab_needed(cfg.task.family, cfg.task.difficulty)) {
    throw MismatchError("eval: checkpoint vocab too small for the configured task");
  }
  std::vector<rollout::EvalRecord> records;
  const auto summary = evaluate(*ck.net, cfg, &records);
  const fs::path out(cfg.out_dir);
  const std::string stem = checkpoint.stem().string();
  std::ostringstream rec, sum;
  rollout::write_records_csv(rec, records);
  rollout::write_summary_csv(sum, summary);
  write_text(out / ("eval_" + stem + "_records.csv"), rec.str());
  write_text(out / ("eval_" + stem + "_summary.csv"), sum.str());
  return summary;
}

void run_spectra(const fs::path& before, const fs::path& after, const fs::path& out_dir) {
  const LoadedCheckpoint a = load_checkpoint(before);
  const LoadedCheckpoint b = load_checkpoint(after);
  const auto report = spectra::spectra_report(*a.net, *b.net);
  std::ostringstream prof, sum;
  spectra::write_profiles_csv(prof, report);
  spectra::write_summary_csv(sum, report, b.config.adapter.rank);
  write_text(out_dir / "spectra_profiles.csv", prof.str());
  write_text(out_dir / "spectra_summary.csv", sum.str());
}

std::vector<CompareRow> run_compare(const fs::path& config_dir, const fs::path& out_dir) {
  if (!fs::is_directory(config_dir)) throw ConfigError("compare: not a directory: " + config_dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(config_dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("compare: no *.json configs in " + config_dir.string());

  std::vector<CompareRow> rows;
  for (const auto& f : files) {
    CompareRow row;
    row.name = f.stem().string();
    try {
      ExperimentConfig cfg = load_config(f);
      cfg.out_dir = (out_dir / row.name).string();
      row.kind = std::string(adapters::kind_name(cfg.adapter.kind));
      row.rank = cfg.adapter.rank;
      const TrainResult tr = run_train(cfg);
      row.trainable_fraction = tr.trainable_fraction;
      row.trainable_params = tr.trainable_params;
      row.total_params = tr.total_params;
      if (!tr.reports.empty()) row.final_reward = tr.reports.back().mean_reward;
      const auto summary = run_eval(tr.final_checkpoint, cfg);
      row.mean_avg_at_k = summary.mean_avg_at_k;
      row.pass_rate = summary.pass_rate;
    } catch (const Error& e) {
      row.status = static_cast<int>(e.code());
      row.message = e.what();
    }
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const CompareRow& a, const CompareRow& b) { return a.trainable_fraction > b.trainable_fraction; });

  std::ostringstream csv;
  csv << "name,kind,rank,trainable_fraction,trainable_params,total_params,mean_avg_at_k,pass_rate,final_reward,status\n";
  for (const auto& r : rows) {
    csv << r.name << ',' << r.kind << ',' << r.rank << ',' << format_double(r.trainable_fraction) << ','
        << r.trainable_params << ',' << r.total_params << ',' << format_double(r.mean_avg_at_k) << ','
        << format_double(r.pass_rate) << ',' << format_double(r.final_reward) << ',' << r.status << '\n';
  }
  write_text(out_dir / "frontier.csv", csv.str());
  return rows;
}

}  // namespace rlpeft::harness
