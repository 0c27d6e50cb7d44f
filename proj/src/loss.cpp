#include "tdr/loss.hpp"

#include <algorithm>
#include <cmath>

namespace tdr {

namespace {

double logsumexp(const Vec& v) {
  double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) {
    s += std::exp(x - m);
  }
  return m + std::log(s);
}

size_t argmax_lowest(const Vec& v) {
  size_t best = 0;
  for (size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) {
      best = i;
    }
  }
  return best;
}

}  // namespace

void validate(const LossConfig& config) {
  if (!(config.gamma > 0.0)) {
    throw ValidationError("LossConfig: gamma must be > 0");
  }
  if (!(config.tau_cont > 0.0)) {
    throw ValidationError("LossConfig: tau_cont must be > 0");
  }
  if (config.lambda < 0.0 || config.alpha < 0.0 || config.beta < 0.0) {
    throw ValidationError("LossConfig: lambda, alpha, beta must be >= 0");
  }
  if (!(config.task_penalty < config.task_threshold && config.task_threshold < 0.0)) {
    throw ValidationError("LossConfig: requires task_penalty < task_threshold < 0");
  }
}

void validate_batch(const std::vector<BatchItem>& batch, const LossConfig& config) {
  if (batch.empty()) {
    throw ValidationError("batch must be non-empty");
  }
  for (const BatchItem& item : batch) {
    if (item.scores.empty() || item.scores.size() != item.llm_values.size()) {
      throw ValidationError("batch item \"" + item.query_id +
                            "\": scores and llm_values must be non-empty and equally long");
    }
    if (!all_finite(item.scores)) {
      throw ValidationError("batch item \"" + item.query_id + "\": non-finite score");
    }
    for (double v : item.llm_values) {
      if (!(v >= config.task_penalty && v <= 0.0)) {
        throw ValidationError("batch item \"" + item.query_id +
                              "\": llm_value outside [task_penalty, 0]");
      }
    }
  }
}

Vec retrieval_likelihood(const Vec& scores, double gamma) {
  if (scores.empty()) {
    throw ValidationError("retrieval_likelihood: empty score vector");
  }
  if (!(gamma > 0.0)) {
    throw ValidationError("retrieval_likelihood: gamma must be > 0");
  }
  if (!all_finite(scores)) {
    throw ValidationError("retrieval_likelihood: non-finite score");
  }
  Vec logits(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) {
    logits[i] = scores[i] / gamma;
  }
  double m = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double& x : logits) {
    x = std::exp(x - m);
    denom += x;
  }
  for (double& x : logits) {
    x /= denom;
  }
  return logits;
}

double q_ce(const BatchItem& item, double gamma) {
  Vec p = retrieval_likelihood(item.scores, gamma);
  return dot(p, item.llm_values);
}

double l_ce(const std::vector<BatchItem>& batch, double gamma) {
  if (batch.empty()) {
    throw ValidationError("l_ce: batch must be non-empty");
  }
  double sum = 0.0;
  for (const BatchItem& item : batch) {
    sum += q_ce(item, gamma);
  }
  return -sum / static_cast<double>(batch.size());
}

std::vector<int> task_mask(const std::vector<BatchItem>& batch, double threshold) {
  std::vector<int> mask(batch.size(), 0);
  for (size_t x = 0; x < batch.size(); ++x) {
    double vmin = *std::min_element(batch[x].llm_values.begin(), batch[x].llm_values.end());
    mask[x] = vmin < threshold ? 1 : 0;
  }
  return mask;
}

MaskedLosses masked_losses(const std::vector<BatchItem>& batch, double gamma, double threshold) {
  if (batch.empty()) {
    throw ValidationError("masked_losses: batch must be non-empty");
  }
  std::vector<int> mask = task_mask(batch, threshold);
  double sum_d = 0.0;
  double sum_s = 0.0;
  for (size_t x = 0; x < batch.size(); ++x) {
    double q = q_ce(batch[x], gamma);
    if (mask[x]) {
      sum_d += q;
    } else {
      sum_s += q;
    }
  }
  double b = static_cast<double>(batch.size());
  return MaskedLosses{-sum_d / b, -sum_s / b};
}

namespace {

// Extended InfoNCE logits for one item: own candidate scores first, then the
// query's scores against other items' positive candidates.
struct ContItem {
  Vec logits;
  size_t pos = 0;      // positive index within own candidates
  size_t own = 0;      // number of own candidates
  double loss = 0.0;
  Vec probs;           // softmax over logits
};

ContItem cont_forward(const BatchItem& item, size_t x, double tau, bool use_cross,
                      const Matrix* cross, size_t batch_size) {
  ContItem c;
  c.own = item.scores.size();
  c.pos = argmax_lowest(item.llm_values);
  c.logits.reserve(c.own + (use_cross ? batch_size - 1 : 0));
  for (double s : item.scores) {
    c.logits.push_back(s / tau);
  }
  if (use_cross) {
    for (size_t x2 = 0; x2 < batch_size; ++x2) {
      if (x2 != x) {
        c.logits.push_back(cross->at(static_cast<int>(x), static_cast<int>(x2)) / tau);
      }
    }
  }
  double lse = logsumexp(c.logits);
  c.loss = lse - c.logits[c.pos];
  c.probs.resize(c.logits.size());
  for (size_t i = 0; i < c.logits.size(); ++i) {
    c.probs[i] = std::exp(c.logits[i] - lse);
  }
  return c;
}

}  // namespace

double info_nce(const std::vector<BatchItem>& batch, double tau_cont, bool in_batch_negatives,
                const Matrix* cross_scores) {
  if (batch.empty()) {
    throw ValidationError("info_nce: batch must be non-empty");
  }
  if (!(tau_cont > 0.0)) {
    throw ValidationError("info_nce: tau_cont must be > 0");
  }
  bool use_cross = in_batch_negatives && batch.size() > 1;
  if (use_cross) {
    if (cross_scores == nullptr) {
      throw ValidationError("info_nce: in-batch negatives need the cross-score matrix");
    }
    if (cross_scores->rows != static_cast<int>(batch.size()) ||
        cross_scores->cols != static_cast<int>(batch.size())) {
      throw ValidationError("info_nce: cross-score matrix must be batch x batch");
    }
  }
  double sum = 0.0;
  for (size_t x = 0; x < batch.size(); ++x) {
    sum += cont_forward(batch[x], x, tau_cont, use_cross, cross_scores, batch.size()).loss;
  }
  return sum / static_cast<double>(batch.size());
}

LossBreakdown combined_loss(const std::vector<BatchItem>& batch, const LossConfig& config,
                            const Matrix* cross_scores) {
  validate(config);
  validate_batch(batch, config);

  size_t bsz = batch.size();
  double b = static_cast<double>(bsz);
  bool use_cross = config.in_batch_negatives && bsz > 1;
  if (use_cross && cross_scores == nullptr) {
    throw ValidationError("combined_loss: in-batch negatives need the cross-score matrix");
  }
  if (use_cross && (cross_scores->rows != static_cast<int>(bsz) ||
                    cross_scores->cols != static_cast<int>(bsz))) {
    throw ValidationError("combined_loss: cross-score matrix must be batch x batch");
  }

  LossBreakdown out;
  out.mask = task_mask(batch, config.task_threshold);
  out.grad_scores.resize(bsz);
  if (use_cross) {
    out.grad_cross = Matrix(static_cast<int>(bsz), static_cast<int>(bsz));
  }

  double sum_q = 0.0;
  double sum_d = 0.0;
  double sum_s = 0.0;
  double sum_cont = 0.0;

  for (size_t x = 0; x < bsz; ++x) {
    const BatchItem& item = batch[x];
    size_t m = item.scores.size();
    Vec p = retrieval_likelihood(item.scores, config.gamma);
    Vec& grad = out.grad_scores[x];
    grad.assign(m, 0.0);

    double q = dot(p, item.llm_values);
    sum_q += q;

    if (config.candidate_level_mask) {
      // Variant: route each candidate by its own feedback value.
      double q_d = 0.0;
      double q_s = 0.0;
      for (size_t i = 0; i < m; ++i) {
        if (item.llm_values[i] < config.task_threshold) {
          q_d += p[i] * item.llm_values[i];
        } else {
          q_s += p[i] * item.llm_values[i];
        }
      }
      sum_d += q_d;
      sum_s += q_s;
      for (size_t i = 0; i < m; ++i) {
        bool masked = item.llm_values[i] < config.task_threshold;
        double vd = masked ? item.llm_values[i] : 0.0;
        double vs = masked ? 0.0 : item.llm_values[i];
        grad[i] += -(p[i] / (b * config.gamma)) *
                   (config.alpha * (vd - q_d) + config.beta * (vs - q_s));
      }
    } else {
      // Paper mechanism: the whole item routes on its minimum feedback value.
      if (out.mask[x]) {
        sum_d += q;
      } else {
        sum_s += q;
      }
      double w = out.mask[x] ? config.alpha : config.beta;
      for (size_t i = 0; i < m; ++i) {
        grad[i] += -(w / (b * config.gamma)) * p[i] * (item.llm_values[i] - q);
      }
    }

    ContItem c = cont_forward(item, x, config.tau_cont, use_cross, cross_scores, bsz);
    sum_cont += c.loss;
    double cont_scale = config.lambda / (b * config.tau_cont);
    for (size_t i = 0; i < m; ++i) {
      grad[i] += cont_scale * (c.probs[i] - (i == c.pos ? 1.0 : 0.0));
    }
    if (use_cross) {
      size_t slot = m;
      for (size_t x2 = 0; x2 < bsz; ++x2) {
        if (x2 != x) {
          out.grad_cross.at(static_cast<int>(x), static_cast<int>(x2)) =
              cont_scale * c.probs[slot++];
        }
      }
    }
  }

  out.l_ce = -sum_q / b;
  out.l_d = -sum_d / b;
  out.l_s = -sum_s / b;
  out.l_cont = sum_cont / b;
  out.l_retriever = config.lambda * out.l_cont + config.alpha * out.l_d + config.beta * out.l_s;
  return out;
}

double kl_baseline_loss(const std::vector<BatchItem>& batch, double gamma,
                        double llm_temperature) {
  if (batch.empty()) {
    throw ValidationError("kl_baseline_loss: batch must be non-empty");
  }
  if (!(llm_temperature > 0.0)) {
    throw ValidationError("kl_baseline_loss: llm_temperature must be > 0");
  }
  double sum = 0.0;
  for (const BatchItem& item : batch) {
    size_t m = item.scores.size();
    Vec lp(m);
    Vec lq(m);
    for (size_t i = 0; i < m; ++i) {
      lp[i] = item.llm_values[i] / llm_temperature;
      lq[i] = item.scores[i] / gamma;
    }
    double lse_p = logsumexp(lp);
    double lse_q = logsumexp(lq);
    double kl = 0.0;
    for (size_t i = 0; i < m; ++i) {
      double log_p = lp[i] - lse_p;
      double log_q = lq[i] - lse_q;
      kl += std::exp(log_p) * (log_p - log_q);
    }
    sum += kl;
  }
  return sum / static_cast<double>(batch.size());
}

std::vector<Vec> kl_baseline_grad(const std::vector<BatchItem>& batch, double gamma,
                                  double llm_temperature) {
  if (batch.empty()) {
    throw ValidationError("kl_baseline_grad: batch must be non-empty");
  }
  if (!(llm_temperature > 0.0)) {
    throw ValidationError("kl_baseline_grad: llm_temperature must be > 0");
  }
  double b = static_cast<double>(batch.size());
  std::vector<Vec> grads(batch.size());
  for (size_t x = 0; x < batch.size(); ++x) {
    const BatchItem& item = batch[x];
    size_t m = item.scores.size();
    Vec target(m);
    for (size_t i = 0; i < m; ++i) {
      target[i] = item.llm_values[i] / llm_temperature;
    }
    double lse_t = logsumexp(target);
    for (double& t : target) {
      t = std::exp(t - lse_t);
    }
    Vec p = retrieval_likelihood(item.scores, gamma);
    grads[x].resize(m);
    for (size_t i = 0; i < m; ++i) {
      grads[x][i] = (p[i] - target[i]) / (b * gamma);
    }
  }
  return grads;
}

}  // namespace tdr
