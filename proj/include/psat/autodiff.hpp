#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "psat/tensor.hpp"

namespace psat::ad {

// Handle into a Tape. Cheap to copy; only valid for the tape that made it.
struct Var {
    std::uint32_t idx = 0;
};

// Reverse-mode autodiff over a dynamically built graph. The graph is a
// tape of nodes appended in evaluation order, so the reverse sweep is a
// single backwards pass over the tape. One tape per forward pass; rebuild
// for every (variable-length) input.
class Tape {
public:
    Var leaf(Tensor2 value);

    Var matmul(Var a, Var b);
    Var matmul_nt(Var a, Var b);  // a * b^T
    Var add(Var a, Var b);
    Var add_row(Var a, Var row);  // broadcast a 1xC row over an RxC matrix
    Var scale(Var a, double s);
    Var softmax_rows(Var x);
    Var layer_norm(Var x, Var gain, Var bias, double epsilon);
    Var tanh(Var x);
    Var square(Var x);
    Var mean_rows(Var x);                      // RxC -> 1xC
    Var concat_cols(std::span<const Var> xs);  // 1xC_i pieces -> 1xSum(C_i)
    Var sum(Var x);                            // -> 1x1

    // Mean weighted binary cross-entropy over the outputs of a 1xL logit
    // row, computed in the numerically stable logits form. `weight`
    // multiplies the whole loss (used for class rebalancing).
    Var bce_with_logits(Var logits, const Tensor2& targets, double weight = 1.0);
    // Cross-entropy of a 1xL logit row against one target class index.
    Var ce_with_logits(Var logits, std::size_t target);

    void backward(Var root);  // root must be 1x1

    const Tensor2& value(Var v) const { return nodes_[v.idx].value; }
    const Tensor2& grad(Var v) const { return nodes_[v.idx].grad; }
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor2 value;
        Tensor2 grad;
        std::function<void(Tape&)> backprop;  // null for leaves
    };

    Var push(Tensor2 value, std::function<void(Tape&)> backprop);
    void accumulate(Var v, const Tensor2& g);

    std::vector<Node> nodes_;
};

}  // namespace psat::ad
