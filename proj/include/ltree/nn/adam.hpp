#pragma once

#include "ltree/core/binio.hpp"
#include "ltree/nn/layers.hpp"

namespace ltree::nn {

template <typename T>
class Adam {
public:
    Adam() = default;
    Adam(ParamRefs<T> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (auto* p : params_) {
            m_.push_back(Tensor<T>::zeros_like(p->value));
            v_.push_back(Tensor<T>::zeros_like(p->value));
        }
    }

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }
    int64_t step_count() const { return step_; }

    void zero_grad() {
        for (auto* p : params_) p->zero_grad();
    }

    void step() {
        ++step_;
        const double bc1 = 1.0 - std::pow(beta1_, double(step_));
        const double bc2 = 1.0 - std::pow(beta2_, double(step_));
        for (size_t i = 0; i < params_.size(); ++i) {
            auto& val = params_[i]->value.data;
            auto& grad = params_[i]->grad.data;
            auto& m = m_[i].data;
            auto& v = v_[i].data;
            for (size_t j = 0; j < val.size(); ++j) {
                const double g = double(grad[j]);
                m[j] = T(beta1_ * double(m[j]) + (1.0 - beta1_) * g);
                v[j] = T(beta2_ * double(v[j]) + (1.0 - beta2_) * g * g);
                const double mhat = double(m[j]) / bc1;
                const double vhat = double(v[j]) / bc2;
                val[j] = T(double(val[j]) - lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    // Moment serialization for resumable training, in parameter order.
    void save_state(io::ByteWriter& w) const {
        w.u64(uint64_t(step_));
        w.u64(params_.size());
        for (size_t i = 0; i < params_.size(); ++i) {
            w.u64(uint64_t(m_[i].numel()));
            for (const T& x : m_[i].data) w.f64(double(x));
            for (const T& x : v_[i].data) w.f64(double(x));
        }
    }

    void load_state(io::ByteReader& r) {
        step_ = int64_t(r.u64());
        const uint64_t n = r.u64();
        if (n != params_.size()) throw std::runtime_error("Adam: state/param count mismatch");
        for (size_t i = 0; i < params_.size(); ++i) {
            const uint64_t cnt = r.u64();
            if (int64_t(cnt) != m_[i].numel()) throw std::runtime_error("Adam: state size mismatch");
            for (T& x : m_[i].data) x = T(r.f64());
            for (T& x : v_[i].data) x = T(r.f64());
        }
    }

private:
    ParamRefs<T> params_;
    std::vector<Tensor<T>> m_, v_;
    double lr_ = 1e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    int64_t step_ = 0;
};

}  // namespace ltree::nn
