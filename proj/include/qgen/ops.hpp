#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "qgen/tensor.hpp"

namespace qgen::ad {

// Elementwise arithmetic over equal shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// Multiply by a plain constant.
Tensor scale(const Tensor& a, double factor);
Tensor neg(const Tensor& a);

// Broadcast a scalar tensor over every element of x; gradients reach both.
Tensor smul(const Tensor& s, const Tensor& x);

// Elementwise activations.
Tensor sigmoid(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor log_op(const Tensor& x);
Tensor clamp_min(const Tensor& x, double floor);

// Reductions to a rank-0 scalar.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor dot(const Tensor& a, const Tensor& b);

// Linear algebra over rank-2 (and rank-1 where stated) tensors.
Tensor matmul(const Tensor& a, const Tensor& b);           // [m,k]x[k,n] -> [m,n]
Tensor matvec(const Tensor& a, const Tensor& x);           // [m,k]x[k]   -> [m]
Tensor vecmat(const Tensor& x, const Tensor& a);           // [m]x[m,n]   -> [n]
Tensor transpose(const Tensor& a);
Tensor affine(const Tensor& w, const Tensor& x, const Tensor& b);  // w*x + b

// Row-broadcast helpers over [m,n] matrices.
Tensor add_rowvec(const Tensor& a, const Tensor& v);       // each row + v
Tensor mul_rowvec(const Tensor& a, const Tensor& v);       // each row * v
Tensor outer_add(const Tensor& u, const Tensor& v);        // out[i][j] = u_i + v_j

// Structure ops.
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor stack_rows(const std::vector<Tensor>& rows);        // m vectors -> [m,n]
Tensor slice(const Tensor& x, std::size_t start, std::size_t len);  // rank 1
Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& indices);
Tensor row(const Tensor& a, std::size_t i);                // [m,n] -> [n]
Tensor pick(const Tensor& x, std::size_t i);               // [n] -> scalar
Tensor scatter_sum(const Tensor& values, const std::vector<std::size_t>& indices,
                   std::size_t out_size);

// Normalization. Masked entries come out exactly zero; every slice must keep
// at least one unmasked entry. axis selects rows (1) or columns (0) for
// rank-2 inputs and is ignored for rank-1.
Tensor softmax(const Tensor& x, std::size_t axis = 0,
               const std::optional<Tensor>& mask = std::nullopt);

// Per-row maximum over unmasked columns; gradient flows to the first argmax.
Tensor rowmax(const Tensor& a, const std::optional<Tensor>& mask = std::nullopt);

}  // namespace qgen::ad
