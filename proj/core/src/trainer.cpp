#include "mdseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "mdseg/matching.hpp"
#include "mdseg/sampler.hpp"

namespace mdseg {

std::string step_record_line(const StepRecord& rec) {
  char buf[400];
  std::snprintf(buf, sizeof buf,
                "{\"step\":%d,\"lr\":%.17g,\"total\":%.17g,\"contrastive\":%.17g,"
                "\"focal\":%.17g,\"dice\":%.17g,\"matched\":%d}",
                rec.step, rec.lr, rec.total, rec.contrastive, rec.focal, rec.dice,
                rec.matched);
  return buf;
}

std::vector<LoadedDataset> load_split(const ExperimentConfig& cfg, const std::string& split) {
  std::vector<LoadedDataset> all = load_corpus(cfg.data_root, split);
  if (cfg.datasets.empty()) return all;
  for (const std::string& id : cfg.datasets) {
    bool found = false;
    for (const LoadedDataset& ds : all) found = found || ds.dataset_id() == id;
    if (!found)
      throw std::runtime_error("dataset '" + id + "' not present in corpus at " +
                               cfg.data_root);
  }
  std::vector<LoadedDataset> kept;
  for (LoadedDataset& ds : all) {
    if (std::find(cfg.datasets.begin(), cfg.datasets.end(), ds.dataset_id()) !=
        cfg.datasets.end())
      kept.push_back(std::move(ds));
  }
  return kept;
}

TrainSession::TrainSession(ExperimentConfig cfg)
    : cfg_(std::move(cfg)),
      train_(load_split(cfg_, "train")),
      encoder_(cfg_.model.ct, cfg_.text_seed),
      model_(cfg_.model),
      opt_(store_, cfg_.optim),
      sampler_rng_(mix64(cfg_.seed, fnv1a64("sampler"))),
      augment_rng_(mix64(cfg_.seed, fnv1a64("augment"))) {
  cfg_.validate();
  if (train_.empty()) throw std::runtime_error("training: no datasets loaded");
  for (const LoadedDataset& ds : train_) {
    registry_.register_dataset(ds.taxonomy);
    sizes_.push_back(ds.size());
  }
  Rng init_rng(mix64(cfg_.seed, fnv1a64("init")));
  model_.init_params(store_, init_rng);
}

StepRecord TrainSession::step() {
  TrainingBatch batch =
      sample_batch(sizes_, cfg_.optim.batch_size, sampler_rng_, cfg_.sampling);
  GradMap<float> grads;
  StepRecord rec;
  rec.step = step_;
  rec.lr = poly_lr(cfg_.optim, step_);
  for (const BatchSlot& slot : batch.slots) {
    const LoadedDataset& ds = train_[static_cast<size_t>(slot.dataset_index)];
    const DatasetSample& raw = ds.samples[static_cast<size_t>(slot.sample_index)];
    AugmentedSample aug =
        augment_for_dataset(raw.image, raw.gt, ds.dataset_id(), cfg_.augment, augment_rng_);
    ArrayF input = image_to_input<float>(aug.image);

    Tape<float> tape;
    ParamBinding<float> p(tape, store_);
    auto fwd = model_.forward_train(tape, p, encoder_, ds.taxonomy, input, cfg_.loss.tau);

    ArrayF logits_v = tape.value(fwd.logits);
    ArrayF probs_v = tape.value(fwd.masks.probs);
    // a diverged model produces NaN/inf activations; report the abort rather
    // than handing the matcher a poisoned cost matrix
    auto all_finite = [](const ArrayF& a) {
      for (float v : a.data)
        if (!std::isfinite(v)) return false;
      return true;
    };
    if (!all_finite(logits_v) || !all_finite(probs_v)) {
      rec.total = std::numeric_limits<double>::quiet_NaN();
      throw NonFiniteLossError(rec);
    }
    MatchResult match = hungarian_match(build_match_cost(logits_v, probs_v, aug.gt, cfg_.loss));
    SampleLoss<float> loss =
        sample_loss(tape, fwd.logits, fwd.masks.probs, aug.gt, match.pred_to_gt,
                    ds.taxonomy.background_index(), cfg_.loss);

    rec.total += tape.value(loss.total)[0];
    rec.contrastive += tape.value(loss.contrastive)[0];
    if (loss.matched > 0) {
      rec.focal += tape.value(loss.focal)[0];
      rec.dice += tape.value(loss.dice)[0];
      rec.matched += loss.matched;
    }
    tape.backward(loss.total);
    p.add_grads_to(grads);
  }
  if (!std::isfinite(rec.total)) throw NonFiniteLossError(rec);
  if (cfg_.optim.clip_norm > 0) clip_grad_norm(store_, grads, cfg_.optim.clip_norm);
  opt_.step(grads, rec.lr);
  ++step_;
  return rec;
}

void run_training(const ExperimentConfig& cfg, std::ostream* echo) {
  cfg.validate();
  TrainSession session(cfg);
  std::ofstream log(cfg.paths.log, std::ios::trunc);
  if (!log) throw std::runtime_error("training: cannot open log file " + cfg.paths.log);
  for (int s = 0; s < cfg.optim.steps; ++s) {
    StepRecord rec;
    try {
      rec = session.step();
    } catch (const NonFiniteLossError& e) {
      log << "{\"step\":" << e.record.step << ",\"event\":\"abort\",\"reason\":\"non-finite loss\"}\n";
      log.flush();
      throw;
    }
    log << step_record_line(rec) << '\n';
    if (echo && (s % 50 == 0 || s + 1 == cfg.optim.steps))
      *echo << "step " << rec.step << " lr " << rec.lr << " loss " << rec.total << '\n';
  }
  log.flush();
  if (!log) throw std::runtime_error("training: failed writing log " + cfg.paths.log);
  save_checkpoint(cfg.paths.checkpoint, cfg, session.params());
}

}  // namespace mdseg
