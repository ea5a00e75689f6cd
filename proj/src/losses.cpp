#include "ssda/losses.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace ssda {

double cross_entropy(const Tensor<double>& probs, const std::vector<int>& labels) {
  check(probs.ndim() == 2 && static_cast<long>(labels.size()) == probs.shape[0],
        "cross_entropy: shape mismatch");
  long B = probs.shape[0];
  check(B >= 1, "cross_entropy: empty batch");
  double s = 0.0;
  for (long i = 0; i < B; ++i) {
    int y = labels[static_cast<size_t>(i)];
    check(y >= 0 && y < probs.shape[1], "cross_entropy: label out of range");
    s -= std::log(std::max(probs.at(i, y), 1e-12));
  }
  return s / static_cast<double>(B);
}

double center_loss(const Tensor<double>& features, const std::vector<int>& labels,
                   const Tensor<double>& centers) {
  check(features.ndim() == 2 && static_cast<long>(labels.size()) == features.shape[0],
        "center_loss: shape mismatch");
  check(centers.ndim() == 2 && centers.shape[1] == features.shape[1],
        "center_loss: center dim mismatch");
  double s = 0.0;
  for (long i = 0; i < features.shape[0]; ++i) {
    int y = labels[static_cast<size_t>(i)];
    check(y >= 0 && y < centers.shape[0], "center_loss: label out of range");
    for (long j = 0; j < features.shape[1]; ++j) {
      double d = features.at(i, j) - centers.at(y, j);
      s += d * d;
    }
  }
  return 0.5 * s;
}

double mse_recon(const Tensor<double>& windows, const std::vector<Tensor<double>>& recons,
                 const std::vector<double>& beta) {
  check(recons.size() == beta.size(), "mse_recon: one weight per column");
  double total = 0.0;
  for (size_t i = 0; i < recons.size(); ++i) {
    check(recons[i].shape == windows.shape, "mse_recon: reconstruction shape mismatch");
    if (beta[i] == 0.0) continue;
    double sse = 0.0;
    for (long j = 0; j < windows.numel(); ++j) {
      double d = windows[j] - recons[i][j];
      sse += d * d;
    }
    total += beta[i] * sse;
  }
  return total;
}

double ds_loss(const Tensor<double>& raw_flat, const std::vector<Tensor<double>>& latents,
               const std::vector<double>& eta, const std::vector<char>& is_labeled,
               bool normalize) {
  check(latents.size() == eta.size(), "ds_loss: one weight per column");
  check(raw_flat.ndim() == 2 && static_cast<long>(is_labeled.size()) == raw_flat.shape[0],
        "ds_loss: group mask size mismatch");
  long B = raw_flat.shape[0];
  std::vector<long> groups[2];
  for (long i = 0; i < B; ++i) groups[is_labeled[static_cast<size_t>(i)] ? 0 : 1].push_back(i);

  auto euclid = [](const Tensor<double>& X, long a, long b) {
    double s = 0.0;
    for (long j = 0; j < X.shape[1]; ++j) {
      double d = X.at(a, j) - X.at(b, j);
      s += d * d;
    }
    return std::sqrt(s);
  };

  double total = 0.0;
  for (size_t col = 0; col < latents.size(); ++col) {
    if (eta[col] == 0.0) continue;
    check(latents[col].shape[0] == B, "ds_loss: latent batch mismatch");
    double col_sum = 0.0;
    for (const auto& g : groups) {
      long G = static_cast<long>(g.size());
      if (G < 2) continue;
      double mu_h = 0.0, mu_l = 0.0;
      long npairs = G * (G - 1);
      if (normalize) {
        for (long a = 0; a < G; ++a)
          for (long b = 0; b < G; ++b) {
            if (a == b) continue;
            mu_h += euclid(raw_flat, g[(size_t)a], g[(size_t)b]);
            mu_l += euclid(latents[col], g[(size_t)a], g[(size_t)b]);
          }
        mu_h = mu_h / static_cast<double>(npairs) + 1e-12;
        mu_l = mu_l / static_cast<double>(npairs) + 1e-12;
      } else {
        mu_h = mu_l = 1.0;
      }
      for (long a = 0; a < G; ++a)
        for (long b = 0; b < G; ++b) {
          if (a == b) continue;
          double dh = euclid(raw_flat, g[(size_t)a], g[(size_t)b]) / mu_h;
          double dl = euclid(latents[col], g[(size_t)a], g[(size_t)b]) / mu_l;
          col_sum += (dh - dl) * (dh - dl);
        }
    }
    total += eta[col] * col_sum;
  }
  return total;
}

}  // namespace ssda
