#include "lcdr/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "lcdr/errors.hpp"
#include "lcdr/rng.hpp"

namespace lcdr {

std::string EpochStats::to_json() const {
  nlohmann::json j;
  j["epoch"] = epoch;
  j["ivae_loss"] = ivae_loss;
  j["lcvae_loss"] = lcvae_loss;
  j["recon"] = recon;
  j["kl"] = kl;
  j["align"] = align;
  j["wall_ms"] = wall_ms;
  return j.dump();
}

namespace {

double params_norm(const MlpParams& p) {
  double ss = 0.0;
  for (const auto& l : p.layers) {
    for (double w : l.weight.data) ss += w * w;
    for (double b : l.bias) ss += b * b;
  }
  return std::sqrt(ss);
}

void validate(const InteractionDataset& ds, const TrainConfig& cfg,
              std::vector<std::string>& warnings) {
  if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (cfg.patience < 1) throw ConfigError("train: patience must be >= 1");
  if (cfg.lambda < 0.0) throw ConfigError("train: lambda must be non-negative");
  if (cfg.lambda > 1.0)
    warnings.push_back("lambda " + std::to_string(cfg.lambda) +
                       " exceeds the conventional [0,1] range");
  if (ds.num_users <= 0 || ds.num_items <= 0)
    throw ConfigError("train: dataset has no users or no items");
  if (ds.proxies.size() != static_cast<std::size_t>(ds.num_users))
    throw ConfigError("train: dataset is missing per-user proxies (" +
                      std::to_string(ds.proxies.size()) + " rows for " +
                      std::to_string(ds.num_users) + " users)");
}

}  // namespace

StageOneResult train_representations(const InteractionDataset& ds, const TrainConfig& cfg,
                                     StageOneMode mode) {
  StageOneResult res;
  validate(ds, cfg, res.warnings);

  const std::size_t num_users = static_cast<std::size_t>(ds.num_users);
  const std::size_t num_items = static_cast<std::size_t>(ds.num_items);
  const std::size_t proxy_dim = ds.proxies.front().w.size();
  const bool run_ivae = mode != StageOneMode::PlainVae;
  const bool run_lcvae = mode != StageOneMode::IvaeOnly;
  const double lambda = mode == StageOneMode::Joint ? cfg.lambda : 0.0;

  // One named stream per consumer of randomness: removing a consumer (a
  // disabled branch, a zero lambda) never shifts the draws any other
  // consumer sees.
  RandomStream ivae_init(cfg.seed, "stage1/ivae/init");
  RandomStream lcvae_init(cfg.seed, "stage1/lcvae/init");
  RandomStream ivae_noise(cfg.seed, "stage1/ivae/noise");
  RandomStream lcvae_noise(cfg.seed, "stage1/lcvae/noise");
  RandomStream shuffle_rng(cfg.seed, "stage1/shuffle");

  res.ivae = make_ivae(num_items, proxy_dim, cfg.latent_dim, cfg.hidden_dim, ivae_init);
  res.lcvae = make_lcvae(num_items, cfg.latent_dim, cfg.hidden_dim, lcvae_init);

  auto exposure = build_exposure(ds);

  AdamState ivae_prior_opt(res.ivae.prior_net.param_count(), cfg.lr, cfg.weight_decay);
  AdamState ivae_enc_opt(res.ivae.encoder_net.param_count(), cfg.lr, cfg.weight_decay);
  AdamState ivae_dec_opt(res.ivae.decoder_net.param_count(), cfg.lr, cfg.weight_decay);
  AdamState lc_enc_opt(res.lcvae.encoder_net.param_count(), cfg.lr, cfg.weight_decay);
  AdamState lc_dec_opt(res.lcvae.decoder_net.param_count(), cfg.lr, cfg.weight_decay);

  IvaeGrads ivae_grads(res.ivae);
  LcvaeGrads lcvae_grads(res.lcvae);

  std::vector<std::size_t> order(num_users);
  std::iota(order.begin(), order.end(), 0);

  double best_loss = std::numeric_limits<double>::infinity();
  int stall = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(order);

    EpochStats stats;
    stats.epoch = epoch;
    double epoch_ivae = 0.0, epoch_lcvae = 0.0, epoch_recon = 0.0, epoch_kl = 0.0,
           epoch_align = 0.0;

    for (std::size_t start = 0; start < num_users; start += cfg.batch_size) {
      const std::size_t end = std::min(num_users, start + cfg.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      ivae_grads.zero();
      lcvae_grads.zero();
      double batch_ivae = 0.0, batch_lcvae = 0.0;

      try {
        for (std::size_t bi = start; bi < end; ++bi) {
          const std::size_t u = order[bi];
          std::vector<double> z_companion;
          if (run_ivae) {
            auto noise = ivae_noise.normal_vec(cfg.latent_dim);
            batch_ivae += ivae_loss_backward(res.ivae, exposure[u], ds.proxies[u], noise,
                                             ivae_grads, &z_companion);
          }
          if (run_lcvae) {
            auto noise = lcvae_noise.normal_vec(cfg.latent_dim);
            LcvaeLossParts parts;
            batch_lcvae += lcvae_loss_backward(res.lcvae, exposure[u], z_companion, lambda,
                                               noise, lcvae_grads, nullptr, &parts);
            epoch_recon += parts.recon;
            epoch_kl += parts.kl;
            epoch_align += parts.align;
          }
        }
        if (!std::isfinite(batch_ivae) || !std::isfinite(batch_lcvae))
          throw NumericalError("non-finite batch loss (ivae=" + std::to_string(batch_ivae) +
                               ", lcvae=" + std::to_string(batch_lcvae) + ")");
      } catch (const NumericalError& e) {
        throw NumericalError(
            "train aborted at epoch " + std::to_string(epoch) + ", batch " +
            std::to_string(start / cfg.batch_size) + ": " + e.what() +
            "; |ivae enc|=" + std::to_string(params_norm(res.ivae.encoder_net)) +
            ", |lcvae enc|=" + std::to_string(params_norm(res.lcvae.encoder_net)));
      }

      if (run_ivae) {
        ivae_grads.scale(inv_batch);
        adam_step(res.ivae.prior_net, ivae_grads.prior, ivae_prior_opt);
        adam_step(res.ivae.encoder_net, ivae_grads.encoder, ivae_enc_opt);
        adam_step(res.ivae.decoder_net, ivae_grads.decoder, ivae_dec_opt);
      }
      if (run_lcvae) {
        lcvae_grads.scale(inv_batch);
        adam_step(res.lcvae.encoder_net, lcvae_grads.encoder, lc_enc_opt);
        adam_step(res.lcvae.decoder_net, lcvae_grads.decoder, lc_dec_opt);
      }
      epoch_ivae += batch_ivae;
      epoch_lcvae += batch_lcvae;
    }

    const double inv_users = 1.0 / static_cast<double>(num_users);
    stats.ivae_loss = epoch_ivae * inv_users;
    stats.lcvae_loss = epoch_lcvae * inv_users;
    stats.recon = epoch_recon * inv_users;
    stats.kl = epoch_kl * inv_users;
    stats.align = epoch_align * inv_users;
    stats.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    res.log.push_back(stats);
    res.epochs_run = epoch + 1;

    const double combined = (run_ivae ? stats.ivae_loss : 0.0) +
                            (run_lcvae ? stats.lcvae_loss : 0.0);
    const double rel_gain = (best_loss - combined) / std::max(1e-12, std::fabs(best_loss));
    if (std::isinf(best_loss) || rel_gain >= 1e-4) {
      stall = 0;
    } else {
      stall++;
    }
    if (combined < best_loss) best_loss = combined;
    if (stall >= cfg.patience) {
      res.converged = true;
      break;
    }
  }

  res.reps = extract_zlc(res.lcvae, run_ivae ? &res.ivae : nullptr, ds);
  return res;
}

RepresentationTable extract_zlc(const LcvaeModel& lcvae, const IvaeModel* ivae,
                                const InteractionDataset& ds) {
  RepresentationTable table;
  auto exposure = build_exposure(ds);
  table.z_lc.reserve(exposure.size());
  for (const auto& row : exposure) {
    GaussianParams q = lcvae_encode(lcvae, row);
    for (double v : q.mean)
      if (!std::isfinite(v))
        throw NumericalError("extract_zlc: non-finite representation for user " +
                             std::to_string(row.user));
    table.z_lc.push_back(std::move(q.mean));
  }
  if (ivae) {
    if (ds.proxies.size() != exposure.size())
      throw ConfigError("extract_zlc: proxies missing for companion extraction");
    table.z.reserve(exposure.size());
    for (const auto& row : exposure) {
      GaussianParams q = ivae_encode(*ivae, row, ds.proxies[row.user]);
      table.z.push_back(std::move(q.mean));
    }
  }
  return table;
}

}  // namespace lcdr
