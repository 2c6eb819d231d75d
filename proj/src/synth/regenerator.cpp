#include <exception>

#include "wtcvae/synth/service.hpp"

namespace wtcvae::synth {

TableLibrary TableLibrary::from_dataset(const StoredDataset& data) {
  TableLibrary lib;
  lib.stats = data.stats;
  const auto& tables = data.dataset.tables;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    lib.entries.push_back({tables[i].name, tables[i].samples,
                           i < data.labels.size() ? data.labels[i] : compute_labels(tables[i], data.stats)});
  }
  return lib;
}

protocol::Tables TableLibrary::listing() const {
  protocol::Tables t;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    t.items.push_back({static_cast<std::int64_t>(i), entries[i].name, entries[i].labels});
  }
  return t;
}

Regenerator::Regenerator(Engine& engine, std::unique_ptr<Generator> generator, const TableLibrary& library,
                         UpdateFn on_update, ErrorFn on_error)
    : engine_(engine),
      generator_(std::move(generator)),
      library_(library),
      on_update_(std::move(on_update)),
      on_error_(std::move(on_error)) {
  if (!generator_) throw Error("regenerator: no generator");
  if (library_.entries.empty()) throw Error("regenerator: empty table library");
  state_.target = library_.entries[0].labels;
  thread_ = std::thread([this] { worker(); });
}

Regenerator::~Regenerator() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  thread_.join();
}

void Regenerator::request_labels(const SemanticLabels& target) {
  {
    std::lock_guard lock(mu_);
    state_.target = target;
    state_.verbatim = false;
    dirty_ = true;
  }
  cv_.notify_one();
}

bool Regenerator::request_table(std::size_t id) {
  if (id >= library_.entries.size()) return false;
  {
    std::lock_guard lock(mu_);
    state_.base = id;
    state_.target = library_.entries[id].labels;
    state_.verbatim = true;
    dirty_ = true;
  }
  cv_.notify_one();
  return true;
}

void Regenerator::wait_idle() {
  std::unique_lock lock(mu_);
  idle_cv_.wait(lock, [&] { return !dirty_ && !busy_; });
}

std::uint64_t Regenerator::completed() const {
  std::lock_guard lock(mu_);
  return completed_;
}

std::size_t Regenerator::base_table() const {
  std::lock_guard lock(mu_);
  return state_.base;
}

protocol::TableUpdate Regenerator::produce(const Request& r) {
  const LibraryEntry& base = library_.entries.at(r.base);
  std::vector<float> out;
  if (r.verbatim) {
    out = base.samples;
  } else {
    const std::vector<float> y = generator_->generate(base.samples, base.labels, r.target);
    const std::vector<double> yd(y.begin(), y.end());
    out = normalize_table(yd).samples;
  }
  protocol::TableUpdate u;
  u.labels = compute_labels(out, library_.stats);
  u.spectrum = protocol::cycle_spectrum(out);
  u.generation = engine_.publish_table(out);
  u.samples = std::move(out);
  return u;
}

void Regenerator::worker() {
  for (;;) {
    Request r;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stop_ || dirty_; });
      if (stop_) return;
      r = state_;
      dirty_ = false;
      busy_ = true;
    }
    try {
      const protocol::TableUpdate u = produce(r);
      if (on_update_) on_update_(u);
    } catch (const std::exception& e) {
      if (on_error_) on_error_(std::string("regeneration failed: ") + e.what());
    }
    {
      std::lock_guard lock(mu_);
      busy_ = false;
      ++completed_;
    }
    idle_cv_.notify_all();
  }
}

}  // namespace wtcvae::synth
