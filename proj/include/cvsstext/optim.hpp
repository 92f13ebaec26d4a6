#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "cvsstext/tensor.hpp"

namespace cvsstext::num {

// named model parameter; frozen ones are skipped by the optimizers
struct Param {
    std::string name;
    Tensor value;
    bool frozen = false;
};

class Sgd {
  public:
    explicit Sgd(double lr) : lr_(lr) {}

    void step(std::vector<Param>& params) {
        for (Param& p : params) {
            if (p.frozen) continue;
            double* w = p.value.data();
            const double* g = p.value.grad();
            for (std::size_t i = 0; i < p.value.size(); ++i) w[i] -= lr_ * g[i];
        }
    }

  private:
    double lr_;
};

class Adam {
  public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

    void step(std::vector<Param>& params) {
        ++t_;
        const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
        for (Param& p : params) {
            if (p.frozen) continue;
            State& st = state_[p.value.id()];
            if (st.m.empty()) {
                st.m.assign(p.value.size(), 0.0);
                st.v.assign(p.value.size(), 0.0);
            }
            double* w = p.value.data();
            const double* g = p.value.grad();
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                st.m[i] = b1_ * st.m[i] + (1.0 - b1_) * g[i];
                st.v[i] = b2_ * st.v[i] + (1.0 - b2_) * g[i] * g[i];
                const double mhat = st.m[i] / bc1;
                const double vhat = st.v[i] / bc2;
                w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

  private:
    struct State {
        std::vector<double> m, v;
    };
    double lr_, b1_, b2_, eps_;
    long long t_ = 0;
    std::map<const void*, State> state_;
};

}  // namespace cvsstext::num
