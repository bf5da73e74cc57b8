#include "drloc/trainer/run.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include "json.hpp"

#include "drloc/localization/losses.hpp"
#include "drloc/numcore/errors.hpp"
#include "drloc/numcore/tape.hpp"

namespace drloc::train {
namespace {

using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

struct StepLosses {
  double ce = 0.0;
  double aux = 0.0;
  double total = 0.0;
};

struct EvalResult {
  double accuracy = 0.0;  // percent
  std::optional<double> pretext_l1;
};

std::vector<nc::NamedTensor> snapshot(const std::vector<nc::Parameter>& params) {
  std::vector<nc::NamedTensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back({p.name, p.value.detach()});
  return out;
}

void zero_grads(const std::vector<nc::Parameter>& params) {
  for (const auto& p : params) {
    nc::Tensor t = p.value;
    t.zero_grad();
  }
}

// Model, heads, optimizer state and the run's random streams.
class Session {
 public:
  Session(const RunSpec& spec, const data::DatasetSplits& data)
      : spec_(spec),
        data_(data),
        init_rng_(nc::Rng::substream(spec.seed, "init")),
        model_(spec.model, init_rng_),
        order_rng_(nc::Rng::substream(spec.seed, "data_order")),
        augment_rng_(nc::Rng::substream(spec.seed, "augment")),
        pretext_rng_(nc::Rng::substream(spec.seed, "pretext")) {
    if (data.train.side != spec.model.image_side || data.test.side != spec.model.image_side) {
      throw ConfigError("dataset image side does not match model.image_side");
    }
    if (data.train.classes != spec.model.classes) {
      throw ConfigError("dataset has " + std::to_string(data.train.classes) +
                        " classes but model.classes is " + std::to_string(spec.model.classes));
    }
    backbone_ = model_.parameters();
    if (spec.aux_enabled) {
      auto head_rng = nc::Rng::substream(spec.seed, "head_init");
      const auto count = loc::heads_required(spec.loss.variant, spec.model.blocks);
      for (std::size_t l = 0; l < count; ++l) {
        heads_.push_back(loc::LocalizationHead::create(spec.model.embed_dim, spec.head_hidden,
                                                       spec.loss.variant,
                                                       spec.model.pretext_side(), head_rng));
        heads_.back().collect("head." + std::to_string(l), head_params_);
      }
      if (!spec.head_weight_decay) {
        for (auto& p : head_params_) p.decay = false;
      }
    }
    all_ = backbone_;
    all_.insert(all_.end(), head_params_.begin(), head_params_.end());
  }

  const std::vector<nc::Parameter>& backbone() const { return backbone_; }
  const std::vector<nc::Parameter>& head_params() const { return head_params_; }
  const std::vector<nc::Parameter>& all_params() const { return all_; }

  std::vector<std::size_t> shuffled_order() {
    std::vector<std::size_t> order(data_.train.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[order_rng_.uniform_int(i)]);
    }
    return order;
  }

  std::vector<bool> flips(std::size_t count) {
    std::vector<bool> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = augment_rng_.uniform_int(2) == 1;
    return out;
  }

  StepLosses train_step(std::span<const std::size_t> idx, const std::vector<bool>& flip,
                        double lr) {
    auto& tape = nc::Tape::current();
    tape.reset();
    zero_grads(all_);
    const auto images = data_.train.batch(idx, flip);
    const auto labels = data_.train.batch_labels(idx);
    auto out = model_.forward(images);
    auto ce = vit::classification_loss(out.logits, labels);
    StepLosses losses;
    losses.ce = ce.item();
    nc::Tensor total = ce;
    if (spec_.aux_enabled) {
      if (spec_.loss.lambda > 0.0) {
        auto pre = loc::pretext_loss(out.grids, heads_, spec_.loss, pretext_rng_);
        losses.aux = pre.loss.item();
        total = loc::total_loss(ce, pre.loss, spec_.loss.lambda);
      } else {
        // logged only: nothing from this branch reaches the tape
        nc::NoGradGuard no_grad;
        losses.aux = loc::pretext_loss(out.grids, heads_, spec_.loss, pretext_rng_).loss.item();
      }
    }
    losses.total = total.item();
    if (!std::isfinite(losses.total)) {
      throw NumericalError("non-finite training loss (ce=" + std::to_string(losses.ce) +
                           ", aux=" + std::to_string(losses.aux) + ")");
    }
    nc::backward(total);
    clip_grad_norm(all_, spec_.optim.grad_clip);
    adamw_step(all_, adam_, lr, spec_.optim);
    tape.reset();
    return losses;
  }

  // Backbone gradient norms of L_ce alone and of the auxiliary loss alone on
  // one batch. Uses a copy of the pretext stream so training is unaffected.
  std::pair<double, double> gradient_norms(std::span<const std::size_t> idx) {
    auto& tape = nc::Tape::current();
    const auto images = data_.train.batch(idx);
    const auto labels = data_.train.batch_labels(idx);
    auto norm_of = [&](bool aux) {
      tape.reset();
      zero_grads(all_);
      auto out = model_.forward(images);
      if (aux) {
        auto rng = pretext_rng_;
        nc::backward(loc::pretext_loss(out.grids, heads_, spec_.loss, rng).loss);
      } else {
        nc::backward(vit::classification_loss(out.logits, labels));
      }
      const double n = global_grad_norm(backbone_);
      tape.reset();
      zero_grads(all_);
      return n;
    };
    return {norm_of(false), norm_of(true)};
  }

  EvalResult evaluate() const {
    nc::NoGradGuard no_grad;
    const auto& test = data_.test;
    auto eval_rng = nc::Rng::substream(spec_.seed, "eval_pretext");
    const std::size_t bs = spec_.optim.batch_size;
    std::size_t correct = 0;
    double l1_sum = 0.0;
    for (std::size_t start = 0; start < test.size(); start += bs) {
      const std::size_t count = std::min(bs, test.size() - start);
      std::vector<std::size_t> idx(count);
      std::iota(idx.begin(), idx.end(), start);
      auto out = model_.forward(test.batch(idx));
      const std::size_t classes = out.logits.dim(1);
      const auto logits = out.logits.data();
      for (std::size_t i = 0; i < count; ++i) {
        const auto row = logits.subspan(i * classes, classes);
        const auto best = std::max_element(row.begin(), row.end()) - row.begin();
        if (best == test.labels[start + i]) ++correct;
      }
      if (spec_.aux_enabled) {
        auto pre = loc::pretext_loss(out.grids, heads_, spec_.loss, eval_rng);
        l1_sum += pre.mean_l1 * static_cast<double>(count);
      }
    }
    EvalResult r;
    r.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(test.size());
    if (spec_.aux_enabled) r.pretext_l1 = l1_sum / static_cast<double>(test.size());
    return r;
  }

 private:
  const RunSpec& spec_;
  const data::DatasetSplits& data_;
  nc::Rng init_rng_;
  vit::VitModel model_;
  loc::HeadSet heads_;
  std::vector<nc::Parameter> backbone_;
  std::vector<nc::Parameter> head_params_;
  std::vector<nc::Parameter> all_;
  AdamState adam_;
  nc::Rng order_rng_;
  nc::Rng augment_rng_;
  nc::Rng pretext_rng_;
};

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::vector<nc::NamedTensor> checkpoint_tensors(const Session& s) {
  auto out = snapshot(s.backbone());
  auto heads = snapshot(s.head_params());
  out.insert(out.end(), heads.begin(), heads.end());
  return out;
}

void write_json_file(const std::filesystem::path& file, const json& j) {
  std::ofstream os(file, std::ios::trunc);
  if (!os) throw DataError("cannot write " + file.string());
  os << j.dump(2) << '\n';
}

}  // namespace

void RunSpec::validate() const {
  model.validate();
  loss.validate();
  optim.validate();
  if (head_hidden == 0) throw ConfigError("head_hidden must be >= 1");
  if (eval_interval == 0) throw ConfigError("eval_interval must be >= 1");
  if (dataset.kind == data::DatasetKind::synthetic && dataset.synthetic.classes != model.classes) {
    throw ConfigError("synthetic classes (" + std::to_string(dataset.synthetic.classes) +
                      ") must equal model.classes (" + std::to_string(model.classes) + ")");
  }
}

std::string metrics_line(const EpochRecord& r) {
  json j;
  j["epoch"] = r.epoch;
  j["lr"] = r.lr;
  j["loss_ce"] = r.loss_ce;
  j["loss_aux"] = r.loss_aux;
  j["loss_total"] = r.loss_total;
  j["test_acc"] = optional_number(r.test_acc);
  j["pretext_l1"] = optional_number(r.pretext_l1);
  j["sec_per_batch"] = optional_number(r.sec_per_batch);
  return j.dump();
}

std::vector<EpochRecord> read_metrics(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw DataError("missing metrics file " + file.string());
  std::vector<EpochRecord> out;
  std::string line;
  std::size_t line_no = 0;
  auto opt = [](const json& j, const char* key) -> std::optional<double> {
    const auto& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      EpochRecord r;
      r.epoch = j.at("epoch").get<std::size_t>();
      r.lr = j.at("lr").get<double>();
      r.loss_ce = j.at("loss_ce").get<double>();
      r.loss_aux = j.at("loss_aux").get<double>();
      r.loss_total = j.at("loss_total").get<double>();
      r.test_acc = opt(j, "test_acc");
      r.pretext_l1 = opt(j, "pretext_l1");
      r.sec_per_batch = opt(j, "sec_per_batch");
      out.push_back(r);
    } catch (const json::exception& e) {
      throw DataError(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

TrainRun run_experiment(const RunSpec& spec) {
  spec.validate();
  const auto data = data::load_dataset(spec.dataset, spec.model.image_side);
  return run_experiment(spec, data);
}

TrainRun run_experiment(const RunSpec& spec, const data::DatasetSplits& data) {
  spec.validate();
  Session session(spec, data);
  TrainRun run;
  run.spec = spec;

  const bool to_disk = !spec.out_dir.empty();
  std::ofstream metrics;
  std::ofstream grad_log;
  if (to_disk) {
    std::filesystem::create_directories(spec.out_dir);
    metrics.open(spec.out_dir / "metrics.jsonl", std::ios::trunc);
    if (!metrics) throw DataError("cannot write " + (spec.out_dir / "metrics.jsonl").string());
    json norm;
    norm["mean"] = data.normalization.mean;
    norm["std"] = data.normalization.stddev;
    write_json_file(spec.out_dir / "normalization.json", norm);
    if (spec.log_grad_norms) grad_log.open(spec.out_dir / "grad_norms.jsonl", std::ios::trunc);
  }

  if (spec.aux_enabled) run.initial_pretext_l1 = session.evaluate().pretext_l1;

  const std::size_t n = data.train.size();
  const std::size_t bs = spec.optim.batch_size;
  const std::size_t batches = (n + bs - 1) / bs;
  double best_acc = -1.0;
  for (std::size_t epoch = 0; epoch < spec.optim.total_epochs; ++epoch) {
    const auto order = session.shuffled_order();
    EpochRecord rec;
    rec.epoch = epoch;
    double seconds = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t start = b * bs;
      const std::size_t count = std::min(bs, n - start);
      const std::span<const std::size_t> idx(order.data() + start, count);
      if (b == 0 && spec.log_grad_norms && spec.aux_enabled && spec.loss.lambda > 0.0) {
        const auto [ce_norm, aux_norm] = session.gradient_norms(idx);
        if (grad_log) {
          json j;
          j["epoch"] = epoch;
          j["grad_norm_ce"] = ce_norm;
          j["grad_norm_aux"] = aux_norm;
          grad_log << j.dump() << '\n' << std::flush;
        }
      }
      const auto flip = session.flips(count);
      const double lr = lr_at(static_cast<double>(epoch) +
                                  static_cast<double>(b) / static_cast<double>(batches),
                              spec.optim);
      const auto t0 = Clock::now();
      StepLosses step;
      try {
        step = session.train_step(idx, flip, lr);
      } catch (const NumericalError& e) {
        throw NumericalError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) +
                             ": " + e.what() +
                             (to_disk ? "; last good checkpoint kept in " + spec.out_dir.string()
                                      : std::string()));
      }
      seconds += std::chrono::duration<double>(Clock::now() - t0).count();
      rec.lr = lr;
      rec.loss_ce += step.ce;
      rec.loss_aux += step.aux;
      rec.loss_total += step.total;
    }
    rec.loss_ce /= static_cast<double>(batches);
    rec.loss_aux /= static_cast<double>(batches);
    rec.loss_total /= static_cast<double>(batches);
    if (spec.log_timing) rec.sec_per_batch = seconds / static_cast<double>(batches);

    const bool last = epoch + 1 == spec.optim.total_epochs;
    if ((epoch + 1) % spec.eval_interval == 0 || last) {
      const auto ev = session.evaluate();
      rec.test_acc = ev.accuracy;
      rec.pretext_l1 = ev.pretext_l1;
      if (to_disk && ev.accuracy > best_acc) {
        nc::save_checkpoint(spec.out_dir / "best.drl", checkpoint_tensors(session));
      }
      best_acc = std::max(best_acc, ev.accuracy);
    }
    run.records.push_back(rec);
    if (to_disk) {
      metrics << metrics_line(rec) << '\n' << std::flush;
      if (spec.checkpoint_every > 0 && (epoch + 1) % spec.checkpoint_every == 0) {
        char name[64];
        std::snprintf(name, sizeof(name), "checkpoint_epoch_%04zu.drl", epoch + 1);
        nc::save_checkpoint(spec.out_dir / name, checkpoint_tensors(session));
      }
    }
  }
  run.backbone = snapshot(session.backbone());
  run.heads = snapshot(session.head_params());
  if (to_disk) nc::save_checkpoint(spec.out_dir / "final.drl", checkpoint_tensors(session));
  return run;
}

StepTiming measure_step_time(const RunSpec& spec, const data::DatasetSplits& data,
                             std::size_t batches, std::size_t warmup) {
  RunSpec with = spec;
  with.aux_enabled = true;
  with.out_dir.clear();
  RunSpec without = with;
  without.aux_enabled = false;
  with.validate();
  Session aux(with, data);
  Session base(without, data);
  const std::size_t bs = spec.optim.batch_size;
  const std::size_t n = data.train.size();
  std::vector<std::size_t> idx(std::min(bs, n));
  StepTiming timing;
  double t_with = 0.0;
  double t_without = 0.0;
  const double lr = spec.optim.base_lr;
  for (std::size_t b = 0; b < warmup + batches; ++b) {
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = (b * idx.size() + i) % n;
    const auto flip = std::vector<bool>(idx.size(), false);
    auto t0 = Clock::now();
    aux.train_step(idx, flip, lr);
    auto t1 = Clock::now();
    base.train_step(idx, flip, lr);
    auto t2 = Clock::now();
    if (b < warmup) continue;
    t_with += std::chrono::duration<double>(t1 - t0).count();
    t_without += std::chrono::duration<double>(t2 - t1).count();
  }
  timing.batches = batches;
  timing.with_aux = t_with / static_cast<double>(batches);
  timing.without_aux = t_without / static_cast<double>(batches);
  return timing;
}

}  // namespace drloc::train
