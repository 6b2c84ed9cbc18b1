#pragma once

#include <map>

#include "ltree/core/binio.hpp"
#include "ltree/nn/layers.hpp"

namespace ltree::nn {

// Named-tensor archive section: parameters are written as f32 with their
// names and shapes, independent of the compute scalar type.
template <typename T>
void write_params(io::ByteWriter& w, const ParamRefs<T>& params) {
    w.u32(uint32_t(params.size()));
    for (const auto* p : params) {
        w.str(p->name);
        w.u32(uint32_t(p->value.shape.size()));
        for (int d : p->value.shape) w.i64(d);
        for (const T& v : p->value.data) w.f32(float(v));
    }
}

template <typename T>
void read_params(io::ByteReader& r, const ParamRefs<T>& params) {
    std::map<std::string, Param<T>*> by_name;
    for (auto* p : params) by_name[p->name] = p;
    const uint32_t n = r.u32();
    if (n != params.size()) throw std::runtime_error("checkpoint: parameter count mismatch");
    for (uint32_t i = 0; i < n; ++i) {
        const std::string name = r.str();
        auto it = by_name.find(name);
        if (it == by_name.end()) throw std::runtime_error("checkpoint: unknown tensor " + name);
        Param<T>* p = it->second;
        const uint32_t ndim = r.u32();
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = int(r.i64());
        if (shape != p->value.shape)
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        for (T& v : p->value.data) v = T(r.f32());
    }
}

}  // namespace ltree::nn
