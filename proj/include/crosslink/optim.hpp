#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "crosslink/tensor.hpp"

namespace crosslink {

// Adam with bias correction.  Moment buffers are addressed positionally, so
// the same parameter list (same order) must be passed to every step; the
// buffers are exposed for checkpointing.
class Adam {
  public:
    explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<Tensor*>& params,
              const std::vector<Tensor*>& grads) {
        if (params.size() != grads.size())
            throw std::invalid_argument("optimizer param/grad count mismatch");
        if (m_.empty()) {
            for (const Tensor* p : params) {
                m_.emplace_back(p->shape);
                v_.emplace_back(p->shape);
            }
        }
        if (m_.size() != params.size())
            throw std::invalid_argument(
                "optimizer was initialized with a different parameter list");
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, double(t_));
        const double bc2 = 1.0 - std::pow(beta2_, double(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor& p = *params[i];
            const Tensor& g = *grads[i];
            Tensor& m = m_[i];
            Tensor& v = v_[i];
            if (!p.same_shape(g) || !p.same_shape(m))
                throw std::invalid_argument("optimizer tensor shape mismatch");
            for (std::size_t j = 0; j < p.data.size(); ++j) {
                m.data[j] = beta1_ * m.data[j] + (1.0 - beta1_) * g.data[j];
                v.data[j] =
                    beta2_ * v.data[j] + (1.0 - beta2_) * g.data[j] * g.data[j];
                const double mhat = m.data[j] / bc1;
                const double vhat = v.data[j] / bc2;
                p.data[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }
    long step_count() const { return t_; }

    // Checkpoint access: first/second moment buffers and the step counter.
    std::vector<Tensor>& first_moments() { return m_; }
    std::vector<Tensor>& second_moments() { return v_; }
    void restore_step_count(long t) { t_ = t; }

  private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Tensor> m_, v_;
};

}  // namespace crosslink
