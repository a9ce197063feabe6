#include "psat/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace psat::ad {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

Var Tape::push(Tensor2 value, std::function<void(Tape&)> backprop) {
    Node n;
    n.grad = Tensor2(value.rows, value.cols, 0.0);
    n.value = std::move(value);
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Tape::accumulate(Var v, const Tensor2& g) { axpy(1.0, g, nodes_[v.idx].grad); }

Var Tape::leaf(Tensor2 value) { return push(std::move(value), nullptr); }

Var Tape::matmul(Var a, Var b) {
    Var self = push(psat::matmul(value(a), value(b)), nullptr);
    nodes_[self.idx].backprop = [self, a, b](Tape& t) {
        const Tensor2& g = t.grad(self);
        t.accumulate(a, psat::matmul_nt(g, t.value(b)));  // dA = dC * B^T
        t.accumulate(b, psat::matmul_tn(t.value(a), g));  // dB = A^T * dC
    };
    return self;
}

Var Tape::matmul_nt(Var a, Var b) {
    Var self = push(psat::matmul_nt(value(a), value(b)), nullptr);
    nodes_[self.idx].backprop = [self, a, b](Tape& t) {
        const Tensor2& g = t.grad(self);
        t.accumulate(a, psat::matmul(g, t.value(b)));     // dA = dC * B
        t.accumulate(b, psat::matmul_tn(g, t.value(a)));  // dB = dC^T * A
    };
    return self;
}

Var Tape::add(Var a, Var b) {
    const Tensor2& va = value(a);
    const Tensor2& vb = value(b);
    if (!va.same_shape(vb)) {
        throw MathError("add: shape mismatch " + va.shape_str() + " vs " + vb.shape_str());
    }
    Tensor2 c = va;
    for (std::size_t i = 0; i < c.size(); ++i) c.data[i] += vb.data[i];
    Var self = push(std::move(c), nullptr);
    nodes_[self.idx].backprop = [self, a, b](Tape& t) {
        t.accumulate(a, t.grad(self));
        t.accumulate(b, t.grad(self));
    };
    return self;
}

Var Tape::add_row(Var a, Var row) {
    const Tensor2& va = value(a);
    const Tensor2& vr = value(row);
    if (vr.rows != 1 || vr.cols != va.cols) {
        throw MathError("add_row: row shape " + vr.shape_str() + " does not broadcast over " +
                        va.shape_str());
    }
    Tensor2 c = va;
    for (std::size_t i = 0; i < c.rows; ++i)
        for (std::size_t j = 0; j < c.cols; ++j) c.at(i, j) += vr.at(0, j);
    Var self = push(std::move(c), nullptr);
    nodes_[self.idx].backprop = [self, a, row](Tape& t) {
        const Tensor2& g = t.grad(self);
        t.accumulate(a, g);
        Tensor2 rg(1, g.cols, 0.0);
        for (std::size_t i = 0; i < g.rows; ++i)
            for (std::size_t j = 0; j < g.cols; ++j) rg.at(0, j) += g.at(i, j);
        t.accumulate(row, rg);
    };
    return self;
}

Var Tape::scale(Var a, double s) {
    Tensor2 c = value(a);
    for (double& v : c.data) v *= s;
    Var self = push(std::move(c), nullptr);
    nodes_[self.idx].backprop = [self, a, s](Tape& t) {
        Tensor2 g = t.grad(self);
        for (double& v : g.data) v *= s;
        t.accumulate(a, g);
    };
    return self;
}

Var Tape::softmax_rows(Var x) {
    Var self = push(psat::softmax_rows(value(x)), nullptr);
    nodes_[self.idx].backprop = [self, x](Tape& t) {
        const Tensor2& y = t.value(self);
        const Tensor2& gy = t.grad(self);
        Tensor2 gx(y.rows, y.cols);
        for (std::size_t i = 0; i < y.rows; ++i) {
            double inner = 0.0;
            for (std::size_t j = 0; j < y.cols; ++j) inner += gy.at(i, j) * y.at(i, j);
            for (std::size_t j = 0; j < y.cols; ++j) {
                gx.at(i, j) = y.at(i, j) * (gy.at(i, j) - inner);
            }
        }
        t.accumulate(x, gx);
    };
    return self;
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double epsilon) {
    const Tensor2& vx = value(x);
    const Tensor2& vg = value(gain);
    const Tensor2& vb = value(bias);
    Tensor2 y = psat::layer_norm(vx, {vg.data.data(), vg.data.size()},
                                 {vb.data.data(), vb.data.size()}, epsilon);

    // Cache the normalized rows and inverse stddevs for the backward pass.
    std::size_t n = vx.cols;
    Tensor2 xhat(vx.rows, vx.cols);
    std::vector<double> inv_std(vx.rows);
    for (std::size_t i = 0; i < vx.rows; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) mean += vx.at(i, j);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double d = vx.at(i, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        inv_std[i] = 1.0 / std::sqrt(var + epsilon);
        for (std::size_t j = 0; j < n; ++j) xhat.at(i, j) = (vx.at(i, j) - mean) * inv_std[i];
    }

    Var self = push(std::move(y), nullptr);
    nodes_[self.idx].backprop = [self, x, gain, bias, xhat = std::move(xhat),
                                 inv_std = std::move(inv_std)](Tape& t) {
        const Tensor2& gy = t.grad(self);
        const Tensor2& vgain = t.value(gain);
        std::size_t rows = gy.rows, cols = gy.cols;
        Tensor2 gx(rows, cols);
        Tensor2 ggain(1, cols, 0.0);
        Tensor2 gbias(1, cols, 0.0);
        for (std::size_t i = 0; i < rows; ++i) {
            double m1 = 0.0, m2 = 0.0;
            std::vector<double> gxh(cols);
            for (std::size_t j = 0; j < cols; ++j) {
                gxh[j] = gy.at(i, j) * vgain.at(0, j);
                m1 += gxh[j];
                m2 += gxh[j] * xhat.at(i, j);
                ggain.at(0, j) += gy.at(i, j) * xhat.at(i, j);
                gbias.at(0, j) += gy.at(i, j);
            }
            m1 /= static_cast<double>(cols);
            m2 /= static_cast<double>(cols);
            for (std::size_t j = 0; j < cols; ++j) {
                gx.at(i, j) = (gxh[j] - m1 - xhat.at(i, j) * m2) * inv_std[i];
            }
        }
        t.accumulate(x, gx);
        t.accumulate(gain, ggain);
        t.accumulate(bias, gbias);
    };
    return self;
}

Var Tape::tanh(Var x) {
    Tensor2 y = value(x);
    for (double& v : y.data) v = std::tanh(v);
    Var self = push(std::move(y), nullptr);
    nodes_[self.idx].backprop = [self, x](Tape& t) {
        const Tensor2& y2 = t.value(self);
        Tensor2 g = t.grad(self);
        for (std::size_t i = 0; i < g.size(); ++i) g.data[i] *= 1.0 - y2.data[i] * y2.data[i];
        t.accumulate(x, g);
    };
    return self;
}

Var Tape::square(Var x) {
    Tensor2 y = value(x);
    for (double& v : y.data) v = v * v;
    Var self = push(std::move(y), nullptr);
    nodes_[self.idx].backprop = [self, x](Tape& t) {
        const Tensor2& vx = t.value(x);
        Tensor2 g = t.grad(self);
        for (std::size_t i = 0; i < g.size(); ++i) g.data[i] *= 2.0 * vx.data[i];
        t.accumulate(x, g);
    };
    return self;
}

Var Tape::mean_rows(Var x) {
    const Tensor2& vx = value(x);
    if (vx.rows == 0) throw MathError("mean_rows: empty input");
    Tensor2 y(1, vx.cols, 0.0);
    for (std::size_t i = 0; i < vx.rows; ++i)
        for (std::size_t j = 0; j < vx.cols; ++j) y.at(0, j) += vx.at(i, j);
    for (double& v : y.data) v /= static_cast<double>(vx.rows);
    Var self = push(std::move(y), nullptr);
    nodes_[self.idx].backprop = [self, x](Tape& t) {
        const Tensor2& g = t.grad(self);
        const Tensor2& vx2 = t.value(x);
        Tensor2 gx(vx2.rows, vx2.cols);
        double inv = 1.0 / static_cast<double>(vx2.rows);
        for (std::size_t i = 0; i < vx2.rows; ++i)
            for (std::size_t j = 0; j < vx2.cols; ++j) gx.at(i, j) = g.at(0, j) * inv;
        t.accumulate(x, gx);
    };
    return self;
}

Var Tape::concat_cols(std::span<const Var> xs) {
    std::size_t total = 0;
    for (Var v : xs) {
        if (value(v).rows != 1) throw MathError("concat_cols: parts must be 1xC");
        total += value(v).cols;
    }
    Tensor2 y(1, total);
    std::size_t off = 0;
    for (Var v : xs) {
        const Tensor2& p = value(v);
        std::copy(p.data.begin(), p.data.end(), y.data.begin() + off);
        off += p.cols;
    }
    std::vector<Var> parts(xs.begin(), xs.end());
    Var self = push(std::move(y), nullptr);
    nodes_[self.idx].backprop = [self, parts = std::move(parts)](Tape& t) {
        const Tensor2& g = t.grad(self);
        std::size_t off2 = 0;
        for (Var v : parts) {
            std::size_t c = t.value(v).cols;
            Tensor2 pg(1, c);
            std::copy(g.data.begin() + off2, g.data.begin() + off2 + c, pg.data.begin());
            t.accumulate(v, pg);
            off2 += c;
        }
    };
    return self;
}

Var Tape::sum(Var x) {
    const Tensor2& vx = value(x);
    double s = 0.0;
    for (double v : vx.data) s += v;
    Var self = push(Tensor2(1, 1, s), nullptr);
    nodes_[self.idx].backprop = [self, x](Tape& t) {
        double g = t.grad(self).at(0, 0);
        const Tensor2& vx2 = t.value(x);
        Tensor2 gx(vx2.rows, vx2.cols, g);
        t.accumulate(x, gx);
    };
    return self;
}

Var Tape::bce_with_logits(Var logits, const Tensor2& targets, double weight) {
    const Tensor2& z = value(logits);
    if (!z.same_shape(targets)) {
        throw MathError("bce_with_logits: logits " + z.shape_str() + " vs targets " +
                        targets.shape_str());
    }
    for (double y : targets.data) {
        if (y != 0.0 && y != 1.0) throw MathError("bce_with_logits: label outside {0,1}");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        double zi = z.data[i];
        double yi = targets.data[i];
        total += std::max(zi, 0.0) - zi * yi + std::log1p(std::exp(-std::abs(zi)));
    }
    double scale = weight / static_cast<double>(z.size());
    Var self = push(Tensor2(1, 1, total * scale), nullptr);
    nodes_[self.idx].backprop = [self, logits, targets, scale](Tape& t) {
        double g = t.grad(self).at(0, 0);
        const Tensor2& z2 = t.value(logits);
        Tensor2 gz(z2.rows, z2.cols);
        for (std::size_t i = 0; i < z2.size(); ++i) {
            gz.data[i] = g * scale * (sigmoid(z2.data[i]) - targets.data[i]);
        }
        t.accumulate(logits, gz);
    };
    return self;
}

Var Tape::ce_with_logits(Var logits, std::size_t target) {
    const Tensor2& z = value(logits);
    if (z.rows != 1 || target >= z.cols) {
        throw MathError("ce_with_logits: bad logits shape or target index");
    }
    double mx = *std::max_element(z.data.begin(), z.data.end());
    double lse = 0.0;
    for (double v : z.data) lse += std::exp(v - mx);
    lse = mx + std::log(lse);
    Var self = push(Tensor2(1, 1, lse - z.data[target]), nullptr);
    nodes_[self.idx].backprop = [self, logits, target](Tape& t) {
        double g = t.grad(self).at(0, 0);
        Tensor2 p = psat::softmax_rows(t.value(logits));
        p.at(0, target) -= 1.0;
        for (double& v : p.data) v *= g;
        t.accumulate(logits, p);
    };
    return self;
}

void Tape::backward(Var root) {
    const Tensor2& rv = value(root);
    if (rv.rows != 1 || rv.cols != 1) {
        throw MathError("backward: root must be a 1x1 scalar, got " + rv.shape_str());
    }
    for (Node& n : nodes_) n.grad.fill(0.0);
    nodes_[root.idx].grad.at(0, 0) = 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        if (nodes_[i].backprop) nodes_[i].backprop(*this);
    }
}

}  // namespace psat::ad
