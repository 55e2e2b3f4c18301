// Copyright 2026 The sefx Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SEFX_KERNELS_HPP_
#define SEFX_KERNELS_HPP_

#include "sefx/tensor.hpp"

namespace sefx {
namespace kernels {

// Worker count for the OpenMP kernels. 1 selects the serial reference path.
// Every parallel kernel partitions independent output elements across
// threads, so results are bit-identical to the serial reference at any
// worker count.
void SetWorkers(int n);
int Workers();

// C[m,n] = A[m,k] * B[k,n]  (+= when accumulate)
void MatMulNN(const double* a, const double* b, double* c, int m, int k, int n,
              bool accumulate);
// C[m,n] = A[m,k] * B[n,k]^T
void MatMulNT(const double* a, const double* b, double* c, int m, int k, int n,
              bool accumulate);
// C[m,n] = A[k,m]^T * B[k,n]
void MatMulTN(const double* a, const double* b, double* c, int m, int k, int n,
              bool accumulate);

// Serial reference implementations, kept for the kernel equivalence tests
// and the benchmark target.
void MatMulNNSerial(const double* a, const double* b, double* c, int m, int k,
                    int n, bool accumulate);
void MatMulNTSerial(const double* a, const double* b, double* c, int m, int k,
                    int n, bool accumulate);
void MatMulTNSerial(const double* a, const double* b, double* c, int m, int k,
                    int n, bool accumulate);

// Depthwise 1-D convolution over the frame axis of x[frames, channels] with
// per-channel taps w[channels, taps], zero-padded so the frame count is
// preserved. dilation >= 1, taps odd.
void DepthwiseConv(const Tensor& x, const Tensor& w, int dilation, Tensor* out);
void DepthwiseConvSerial(const Tensor& x, const Tensor& w, int dilation,
                         Tensor* out);
// dx[frames, channels] += gradient; dw[channels, taps] likewise.
void DepthwiseConvBackward(const Tensor& x, const Tensor& w, int dilation,
                           const Tensor& dout, Tensor* dx, Tensor* dw);

int UnfoldFrames(int t, int win, int hop);

// Frame a signal row of length t into out[frames, win] with the given hop.
void Unfold(const double* x, int t, int win, int hop, Tensor* out);
// Overlap-add of frames[frames, win] onto a length-t buffer (accumulates).
void FoldAdd(const Tensor& frames, int hop, int t, double* out);
void FoldAddSerial(const Tensor& frames, int hop, int t, double* out);

// Elementwise transcendental maps (used on the hot activation paths).
void MapTanh(const double* in, double* out, std::size_t n);
void MapTanhSerial(const double* in, double* out, std::size_t n);
void MapSigmoid(const double* in, double* out, std::size_t n);

}  // namespace kernels
}  // namespace sefx

#endif  // SEFX_KERNELS_HPP_
