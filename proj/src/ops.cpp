#include "idgen/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace idgen {

static bool want_grad(const Tensor& t) {
    return grad_enabled() && t.requires_grad;
}

static void attach(Tensor& out, std::vector<Tensor> parents,
                   std::function<void(Tensor&)> bw) {
    if (!out.requires_grad) return;
    out.node = std::make_shared<Node>();
    out.node->parents = std::move(parents);
    out.node->backward = std::move(bw);
}

static bool is_suffix(const std::vector<int>& small, const std::vector<int>& big) {
    if (small.size() > big.size()) return false;
    return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

static bool is_prefix(const std::vector<int>& small, const std::vector<int>& big) {
    if (small.size() > big.size()) return false;
    return std::equal(small.begin(), small.end(), big.begin());
}

Tensor add(const Tensor& a, const Tensor& b) {
    const std::size_t n = a.numel();
    const std::size_t m = b.numel();
    Tensor out = Tensor::zeros(a.shape, want_grad(a) || want_grad(b));
    const float* pa = a.ptr();
    const float* pb = b.ptr();
    float* po = out.ptr();

    // mode 0: same shape, 1: b is suffix (i % m), 2: b is prefix (i / inner)
    int mode;
    std::size_t inner = 1;
    if (a.shape == b.shape) {
        mode = 0;
        for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
    } else if (is_suffix(b.shape, a.shape)) {
        mode = 1;
        for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i % m];
    } else if (is_prefix(b.shape, a.shape)) {
        mode = 2;
        inner = n / m;
        for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i / inner];
    } else {
        throw std::runtime_error("add: shape mismatch " + shape_str(a.shape) + " vs " +
                                 shape_str(b.shape));
    }
    check_finite(out, "add");

    attach(out, {a, b}, [mode, inner, n, m](Tensor& o) {
        Tensor& pa = o.node->parents[0];
        Tensor& pb = o.node->parents[1];
        const float* go = o.grad->data();
        if (pa.requires_grad) {
            float* ga = pa.grad->data();
            for (std::size_t i = 0; i < n; ++i) ga[i] += go[i];
        }
        if (pb.requires_grad) {
            float* gb = pb.grad->data();
            if (mode == 0) {
                for (std::size_t i = 0; i < n; ++i) gb[i] += go[i];
            } else if (mode == 1) {
                for (std::size_t i = 0; i < n; ++i) gb[i % m] += go[i];
            } else {
                for (std::size_t i = 0; i < n; ++i) gb[i / inner] += go[i];
            }
        }
    });
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape)
        throw std::runtime_error("sub: shape mismatch " + shape_str(a.shape) + " vs " +
                                 shape_str(b.shape));
    const std::size_t n = a.numel();
    Tensor out = Tensor::zeros(a.shape, want_grad(a) || want_grad(b));
    for (std::size_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] - (*b.data)[i];
    check_finite(out, "sub");

    attach(out, {a, b}, [n](Tensor& o) {
        Tensor& pa = o.node->parents[0];
        Tensor& pb = o.node->parents[1];
        const float* go = o.grad->data();
        if (pa.requires_grad) {
            float* ga = pa.grad->data();
            for (std::size_t i = 0; i < n; ++i) ga[i] += go[i];
        }
        if (pb.requires_grad) {
            float* gb = pb.grad->data();
            for (std::size_t i = 0; i < n; ++i) gb[i] -= go[i];
        }
    });
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape)
        throw std::runtime_error("mul: shape mismatch " + shape_str(a.shape) + " vs " +
                                 shape_str(b.shape));
    const std::size_t n = a.numel();
    Tensor out = Tensor::zeros(a.shape, want_grad(a) || want_grad(b));
    for (std::size_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] * (*b.data)[i];
    check_finite(out, "mul");

    attach(out, {a, b}, [n](Tensor& o) {
        Tensor& pa = o.node->parents[0];
        Tensor& pb = o.node->parents[1];
        const float* go = o.grad->data();
        if (pa.requires_grad) {
            float* ga = pa.grad->data();
            const float* db = pb.ptr();
            for (std::size_t i = 0; i < n; ++i) ga[i] += go[i] * db[i];
        }
        if (pb.requires_grad) {
            float* gb = pb.grad->data();
            const float* da = pa.ptr();
            for (std::size_t i = 0; i < n; ++i) gb[i] += go[i] * da[i];
        }
    });
    return out;
}

Tensor scale(const Tensor& a, float s) {
    const std::size_t n = a.numel();
    Tensor out = Tensor::zeros(a.shape, want_grad(a));
    for (std::size_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] * s;
    check_finite(out, "scale");

    attach(out, {a}, [n, s](Tensor& o) {
        Tensor& pa = o.node->parents[0];
        if (!pa.requires_grad) return;
        const float* go = o.grad->data();
        float* ga = pa.grad->data();
        for (std::size_t i = 0; i < n; ++i) ga[i] += go[i] * s;
    });
    return out;
}

Tensor add_scalar(const Tensor& a, float s) {
    const std::size_t n = a.numel();
    Tensor out = Tensor::zeros(a.shape, want_grad(a));
    for (std::size_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] + s;
    check_finite(out, "add_scalar");

    attach(out, {a}, [n](Tensor& o) {
        Tensor& pa = o.node->parents[0];
        if (!pa.requires_grad) return;
        const float* go = o.grad->data();
        float* ga = pa.grad->data();
        for (std::size_t i = 0; i < n; ++i) ga[i] += go[i];
    });
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw std::runtime_error("matmul: expects rank-2 tensors");
    const int m = a.shape[0], k = a.shape[1];
    const int k2 = b.shape[0], n = b.shape[1];
    if (k != k2)
        throw std::runtime_error("matmul: inner dims disagree " + shape_str(a.shape) + " x " +
                                 shape_str(b.shape));

    Tensor out = Tensor::zeros({m, n}, want_grad(a) || want_grad(b));
    const float* pa = a.ptr();
    const float* pb = b.ptr();
    float* po = out.ptr();
    std::vector<double> row(static_cast<std::size_t>(n));
    for (int i = 0; i < m; ++i) {
        std::fill(row.begin(), row.end(), 0.0);
        for (int kk = 0; kk < k; ++kk) {
            const double av = pa[static_cast<std::size_t>(i) * k + kk];
            const float* brow = pb + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) row[j] += av * brow[j];
        }
        for (int j = 0; j < n; ++j) po[static_cast<std::size_t>(i) * n + j] = static_cast<float>(row[j]);
    }
    check_finite(out, "matmul");

    attach(out, {a, b}, [m, k, n](Tensor& o) {
        Tensor& pa = o.node->parents[0];
        Tensor& pb = o.node->parents[1];
        const float* go = o.grad->data();
        // dA += dC * B^T
        if (pa.requires_grad) {
            float* ga = pa.grad->data();
            const float* db = pb.ptr();
            for (int i = 0; i < m; ++i) {
                for (int kk = 0; kk < k; ++kk) {
                    double acc = 0.0;
                    const float* gr = go + static_cast<std::size_t>(i) * n;
                    const float* br = db + static_cast<std::size_t>(kk) * n;
                    for (int j = 0; j < n; ++j) acc += static_cast<double>(gr[j]) * br[j];
                    ga[static_cast<std::size_t>(i) * k + kk] += static_cast<float>(acc);
                }
            }
        }
        // dB += A^T * dC
        if (pb.requires_grad) {
            float* gb = pb.grad->data();
            const float* da = pa.ptr();
            std::vector<double> row(static_cast<std::size_t>(n));
            for (int kk = 0; kk < k; ++kk) {
                std::fill(row.begin(), row.end(), 0.0);
                for (int i = 0; i < m; ++i) {
                    const double av = da[static_cast<std::size_t>(i) * k + kk];
                    const float* gr = go + static_cast<std::size_t>(i) * n;
                    for (int j = 0; j < n; ++j) row[j] += av * gr[j];
                }
                for (int j = 0; j < n; ++j)
                    gb[static_cast<std::size_t>(kk) * n + j] += static_cast<float>(row[j]);
            }
        }
    });
    return out;
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw std::runtime_error("transpose: expects rank-2 tensor");
    const int m = a.shape[0], n = a.shape[1];
    Tensor out = Tensor::zeros({n, m}, want_grad(a));
    const float* pa = a.ptr();
    float* po = out.ptr();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            po[static_cast<std::size_t>(j) * m + i] = pa[static_cast<std::size_t>(i) * n + j];

    attach(out, {a}, [m, n](Tensor& o) {
        Tensor& pa = o.node->parents[0];
        if (!pa.requires_grad) return;
        const float* go = o.grad->data();
        float* ga = pa.grad->data();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                ga[static_cast<std::size_t>(i) * n + j] += go[static_cast<std::size_t>(j) * m + i];
    });
    return out;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad) {
    if (x.rank() != 4 || w.rank() != 4)
        throw std::runtime_error("conv2d: expects x[B,C,H,W] and w[O,C,kh,kw]");
    const int B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
    const int O = w.shape[0], kh = w.shape[2], kw = w.shape[3];
    if (w.shape[1] != C) throw std::runtime_error("conv2d: channel mismatch");
    if (stride < 1 || pad < 0) throw std::runtime_error("conv2d: invalid stride/pad");
    if (H + 2 * pad < kh || W + 2 * pad < kw)
        throw std::runtime_error("conv2d: kernel does not fit padded input");
    if (bias.defined() && (bias.rank() != 1 || bias.shape[0] != O))
        throw std::runtime_error("conv2d: bias must be [O]");
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;

    bool rg = want_grad(x) || want_grad(w) || (bias.defined() && want_grad(bias));
    Tensor out = Tensor::zeros({B, O, Ho, Wo}, rg);
    const float* px = x.ptr();
    const float* pw = w.ptr();
    float* po = out.ptr();

    std::vector<double> acc(static_cast<std::size_t>(O) * Ho * Wo);
    for (int b = 0; b < B; ++b) {
        if (bias.defined()) {
            for (int o = 0; o < O; ++o)
                std::fill_n(acc.begin() + static_cast<std::size_t>(o) * Ho * Wo,
                            static_cast<std::size_t>(Ho) * Wo, static_cast<double>((*bias.data)[o]));
        } else {
            std::fill(acc.begin(), acc.end(), 0.0);
        }
        for (int o = 0; o < O; ++o) {
            double* ao = acc.data() + static_cast<std::size_t>(o) * Ho * Wo;
            for (int c = 0; c < C; ++c) {
                const float* xc = px + (static_cast<std::size_t>(b) * C + c) * H * W;
                const float* wc = pw + (static_cast<std::size_t>(o) * C + c) * kh * kw;
                for (int i = 0; i < kh; ++i) {
                    for (int j = 0; j < kw; ++j) {
                        const double wv = wc[i * kw + j];
                        if (wv == 0.0) continue;
                        for (int oh = 0; oh < Ho; ++oh) {
                            const int ih = oh * stride - pad + i;
                            if (ih < 0 || ih >= H) continue;
                            const float* xrow = xc + static_cast<std::size_t>(ih) * W;
                            double* arow = ao + static_cast<std::size_t>(oh) * Wo;
                            for (int ow = 0; ow < Wo; ++ow) {
                                const int iw = ow * stride - pad + j;
                                if (iw < 0 || iw >= W) continue;
                                arow[ow] += wv * xrow[iw];
                            }
                        }
                    }
                }
            }
        }
        float* ob = po + static_cast<std::size_t>(b) * O * Ho * Wo;
        for (std::size_t i = 0; i < acc.size(); ++i) ob[i] = static_cast<float>(acc[i]);
    }
    check_finite(out, "conv2d");

    std::vector<Tensor> parents = {x, w};
    if (bias.defined()) parents.push_back(bias);
    attach(out, std::move(parents), [B, C, H, W, O, kh, kw, stride, pad, Ho, Wo](Tensor& o) {
        Tensor& px_ = o.node->parents[0];
        Tensor& pw_ = o.node->parents[1];
        const bool has_bias = o.node->parents.size() > 2;
        const float* go = o.grad->data();
        const float* px = px_.ptr();
        const float* pw = pw_.ptr();

        if (px_.requires_grad) {
            float* gx = px_.grad->data();
            std::vector<double> accx(static_cast<std::size_t>(C) * H * W);
            for (int b = 0; b < B; ++b) {
                std::fill(accx.begin(), accx.end(), 0.0);
                const float* gb = go + static_cast<std::size_t>(b) * O * Ho * Wo;
                for (int o_ = 0; o_ < O; ++o_) {
                    const float* gob = gb + static_cast<std::size_t>(o_) * Ho * Wo;
                    for (int c = 0; c < C; ++c) {
                        double* axc = accx.data() + static_cast<std::size_t>(c) * H * W;
                        const float* wc = pw + (static_cast<std::size_t>(o_) * C + c) * kh * kw;
                        for (int i = 0; i < kh; ++i) {
                            for (int j = 0; j < kw; ++j) {
                                const double wv = wc[i * kw + j];
                                if (wv == 0.0) continue;
                                for (int oh = 0; oh < Ho; ++oh) {
                                    const int ih = oh * stride - pad + i;
                                    if (ih < 0 || ih >= H) continue;
                                    const float* grow = gob + static_cast<std::size_t>(oh) * Wo;
                                    double* xrow = axc + static_cast<std::size_t>(ih) * W;
                                    for (int ow = 0; ow < Wo; ++ow) {
                                        const int iw = ow * stride - pad + j;
                                        if (iw < 0 || iw >= W) continue;
                                        xrow[iw] += wv * grow[ow];
                                    }
                                }
                            }
                        }
                    }
                }
                float* gxb = gx + static_cast<std::size_t>(b) * C * H * W;
                for (std::size_t i = 0; i < accx.size(); ++i) gxb[i] += static_cast<float>(accx[i]);
            }
        }

        if (pw_.requires_grad) {
            float* gw = pw_.grad->data();
            std::vector<double> accw(static_cast<std::size_t>(O) * C * kh * kw, 0.0);
            for (int b = 0; b < B; ++b) {
                const float* gb = go + static_cast<std::size_t>(b) * O * Ho * Wo;
                const float* xb = px + static_cast<std::size_t>(b) * C * H * W;
                for (int o_ = 0; o_ < O; ++o_) {
                    const float* gob = gb + static_cast<std::size_t>(o_) * Ho * Wo;
                    for (int c = 0; c < C; ++c) {
                        const float* xc = xb + static_cast<std::size_t>(c) * H * W;
                        double* wc = accw.data() + (static_cast<std::size_t>(o_) * C + c) * kh * kw;
                        for (int i = 0; i < kh; ++i) {
                            for (int j = 0; j < kw; ++j) {
                                double acc = 0.0;
                                for (int oh = 0; oh < Ho; ++oh) {
                                    const int ih = oh * stride - pad + i;
                                    if (ih < 0 || ih >= H) continue;
                                    const float* grow = gob + static_cast<std::size_t>(oh) * Wo;
                                    const float* xrow = xc + static_cast<std::size_t>(ih) * W;
                                    for (int ow = 0; ow < Wo; ++ow) {
                                        const int iw = ow * stride - pad + j;
                                        if (iw < 0 || iw >= W) continue;
                                        acc += static_cast<double>(grow[ow]) * xrow[iw];
                                    }
                                }
                                wc[i * kw + j] += acc;
                            }
                        }
                    }
                }
            }
            for (std::size_t i = 0; i < accw.size(); ++i) gw[i] += static_cast<float>(accw[i]);
        }

        if (has_bias && o.node->parents[2].requires_grad) {
            Tensor& pb_ = o.node->parents[2];
            float* gbias = pb_.grad->data();
            for (int o_ = 0; o_ < O; ++o_) {
                double acc = 0.0;
                for (int b = 0; b < B; ++b) {
                    const float* gob = go + (static_cast<std::size_t>(b) * O + o_) * Ho * Wo;
                    for (int i = 0; i < Ho * Wo; ++i) acc += gob[i];
                }
                gbias[o_] += static_cast<float>(acc);
            }
        }
    });
    return out;
}

Tensor silu(const Tensor& x) {
    const std::size_t n = x.numel();
    Tensor out = Tensor::zeros(x.shape, want_grad(x));
    for (std::size_t i = 0; i < n; ++i) {
        const float v = (*x.data)[i];
        const float s = 1.0f / (1.0f + std::exp(-v));
        (*out.data)[i] = v * s;
    }
    check_finite(out, "silu");

    attach(out, {x}, [n](Tensor& o) {
        Tensor& px = o.node->parents[0];
        if (!px.requires_grad) return;
        const float* go = o.grad->data();
        const float* dx = px.ptr();
        float* gx = px.grad->data();
        for (std::size_t i = 0; i < n; ++i) {
            const float v = dx[i];
            const float s = 1.0f / (1.0f + std::exp(-v));
            gx[i] += go[i] * s * (1.0f + v * (1.0f - s));
        }
    });
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
    if (x.rank() < 2) throw std::runtime_error("layer_norm: expects rank >= 2");
    const int C = x.shape[1];
    if (gamma.rank() != 1 || gamma.shape[0] != C || beta.rank() != 1 || beta.shape[0] != C)
        throw std::runtime_error("layer_norm: gamma/beta must be [channels]");
    const int B = x.shape[0];
    const std::size_t feat = x.numel() / static_cast<std::size_t>(B);   // per-sample size
    const std::size_t inner = feat / static_cast<std::size_t>(C);       // spatial size per channel

    Tensor out = Tensor::zeros(x.shape, want_grad(x) || want_grad(gamma) || want_grad(beta));
    const float* px = x.ptr();
    const float* pg = gamma.ptr();
    const float* pbt = beta.ptr();
    float* po = out.ptr();

    std::vector<float> mean_b(B), invstd_b(B);
    for (int b = 0; b < B; ++b) {
        const float* xb = px + static_cast<std::size_t>(b) * feat;
        double m = 0.0;
        for (std::size_t i = 0; i < feat; ++i) m += xb[i];
        m /= static_cast<double>(feat);
        double var = 0.0;
        for (std::size_t i = 0; i < feat; ++i) {
            const double d = xb[i] - m;
            var += d * d;
        }
        var /= static_cast<double>(feat);
        const double istd = 1.0 / std::sqrt(var + eps);
        mean_b[b] = static_cast<float>(m);
        invstd_b[b] = static_cast<float>(istd);
        float* ob = po + static_cast<std::size_t>(b) * feat;
        for (int c = 0; c < C; ++c) {
            const float g = pg[c], bt = pbt[c];
            for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t k = static_cast<std::size_t>(c) * inner + i;
                ob[k] = static_cast<float>((xb[k] - m) * istd) * g + bt;
            }
        }
    }
    check_finite(out, "layer_norm");

    attach(out, {x, gamma, beta},
           [B, C, feat, inner, mean_b = std::move(mean_b),
            invstd_b = std::move(invstd_b)](Tensor& o) {
        Tensor& px_ = o.node->parents[0];
        Tensor& pg_ = o.node->parents[1];
        Tensor& pb_ = o.node->parents[2];
        const float* go = o.grad->data();
        const float* px = px_.ptr();
        const float* pg = pg_.ptr();

        if (pg_.requires_grad || pb_.requires_grad) {
            for (int c = 0; c < C; ++c) {
                double dg = 0.0, db = 0.0;
                for (int b = 0; b < B; ++b) {
                    const float* xb = px + static_cast<std::size_t>(b) * feat;
                    const float* gb = go + static_cast<std::size_t>(b) * feat;
                    const float m = mean_b[b], istd = invstd_b[b];
                    for (std::size_t i = 0; i < inner; ++i) {
                        const std::size_t k = static_cast<std::size_t>(c) * inner + i;
                        dg += static_cast<double>(gb[k]) * (xb[k] - m) * istd;
                        db += gb[k];
                    }
                }
                if (pg_.requires_grad) (*pg_.grad)[c] += static_cast<float>(dg);
                if (pb_.requires_grad) (*pb_.grad)[c] += static_cast<float>(db);
            }
        }

        if (px_.requires_grad) {
            float* gx = px_.grad->data();
            // dx = istd * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
            for (int b = 0; b < B; ++b) {
                const float* xb = px + static_cast<std::size_t>(b) * feat;
                const float* gb = go + static_cast<std::size_t>(b) * feat;
                const float m = mean_b[b], istd = invstd_b[b];
                double s1 = 0.0, s2 = 0.0;
                for (int c = 0; c < C; ++c) {
                    const float g = pg[c];
                    for (std::size_t i = 0; i < inner; ++i) {
                        const std::size_t k = static_cast<std::size_t>(c) * inner + i;
                        const double dxhat = static_cast<double>(gb[k]) * g;
                        const double xhat = (xb[k] - m) * istd;
                        s1 += dxhat;
                        s2 += dxhat * xhat;
                    }
                }
                s1 /= static_cast<double>(feat);
                s2 /= static_cast<double>(feat);
                float* gxb = gx + static_cast<std::size_t>(b) * feat;
                for (int c = 0; c < C; ++c) {
                    const float g = pg[c];
                    for (std::size_t i = 0; i < inner; ++i) {
                        const std::size_t k = static_cast<std::size_t>(c) * inner + i;
                        const double dxhat = static_cast<double>(gb[k]) * g;
                        const double xhat = (xb[k] - m) * istd;
                        gxb[k] += static_cast<float>(istd * (dxhat - s1 - xhat * s2));
                    }
                }
            }
        }
    });
    return out;
}

Tensor softmax(const Tensor& x, int axis) {
    if (axis < 0 || axis >= x.rank()) throw std::runtime_error("softmax: invalid axis");
    const int n = x.shape[axis];
    std::size_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(x.shape[i]);
    for (int i = axis + 1; i < x.rank(); ++i) inner *= static_cast<std::size_t>(x.shape[i]);

    Tensor out = Tensor::zeros(x.shape, want_grad(x));
    const float* px = x.ptr();
    float* po = out.ptr();
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t j = 0; j < inner; ++j) {
            const std::size_t base = o * n * inner + j;
            float mx = px[base];
            for (int k = 1; k < n; ++k) mx = std::max(mx, px[base + k * inner]);
            double denom = 0.0;
            for (int k = 0; k < n; ++k) denom += std::exp(static_cast<double>(px[base + k * inner]) - mx);
            for (int k = 0; k < n; ++k)
                po[base + k * inner] =
                    static_cast<float>(std::exp(static_cast<double>(px[base + k * inner]) - mx) / denom);
        }
    }
    check_finite(out, "softmax");

    attach(out, {x}, [n, outer, inner](Tensor& o) {
        Tensor& px = o.node->parents[0];
        if (!px.requires_grad) return;
        const float* go = o.grad->data();
        const float* y = o.ptr();
        float* gx = px.grad->data();
        // dx = y * (go - sum(go * y))
        for (std::size_t ot = 0; ot < outer; ++ot) {
            for (std::size_t j = 0; j < inner; ++j) {
                const std::size_t base = ot * n * inner + j;
                double dot = 0.0;
                for (int k = 0; k < n; ++k)
                    dot += static_cast<double>(go[base + k * inner]) * y[base + k * inner];
                for (int k = 0; k < n; ++k) {
                    const std::size_t idx = base + k * inner;
                    gx[idx] += static_cast<float>(y[idx] * (go[idx] - dot));
                }
            }
        }
    });
    return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2) throw std::runtime_error("cross_entropy: expects [N,K] logits");
    const int N = logits.shape[0], K = logits.shape[1];
    if (static_cast<int>(labels.size()) != N)
        throw std::runtime_error("cross_entropy: label count mismatch");
    for (int y : labels)
        if (y < 0 || y >= K) throw std::runtime_error("cross_entropy: label out of range");

    const float* pl = logits.ptr();
    double total = 0.0;
    for (int i = 0; i < N; ++i) {
        const float* row = pl + static_cast<std::size_t>(i) * K;
        float mx = row[0];
        for (int k = 1; k < K; ++k) mx = std::max(mx, row[k]);
        double denom = 0.0;
        for (int k = 0; k < K; ++k) denom += std::exp(static_cast<double>(row[k]) - mx);
        total += std::log(denom) + mx - row[labels[static_cast<std::size_t>(i)]];
    }
    Tensor out = Tensor::zeros({1}, want_grad(logits));
    (*out.data)[0] = static_cast<float>(total / N);
    check_finite(out, "cross_entropy");

    attach(out, {logits}, [N, K, labels](Tensor& o) {
        Tensor& pl_ = o.node->parents[0];
        if (!pl_.requires_grad) return;
        const float g = (*o.grad)[0];
        const float* pl = pl_.ptr();
        float* gl = pl_.grad->data();
        for (int i = 0; i < N; ++i) {
            const float* row = pl + static_cast<std::size_t>(i) * K;
            float mx = row[0];
            for (int k = 1; k < K; ++k) mx = std::max(mx, row[k]);
            double denom = 0.0;
            for (int k = 0; k < K; ++k) denom += std::exp(static_cast<double>(row[k]) - mx);
            for (int k = 0; k < K; ++k) {
                const double p = std::exp(static_cast<double>(row[k]) - mx) / denom;
                const double onehot = (k == labels[static_cast<std::size_t>(i)]) ? 1.0 : 0.0;
                gl[static_cast<std::size_t>(i) * K + k] +=
                    static_cast<float>(g * (p - onehot) / N);
            }
        }
    });
    return out;
}

Tensor upsample_nearest2x(const Tensor& x) {
    if (x.rank() != 4) throw std::runtime_error("upsample_nearest2x: expects [B,C,H,W]");
    const int B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
    Tensor out = Tensor::zeros({B, C, 2 * H, 2 * W}, want_grad(x));
    const float* px = x.ptr();
    float* po = out.ptr();
    for (int bc = 0; bc < B * C; ++bc) {
        const float* xi = px + static_cast<std::size_t>(bc) * H * W;
        float* oi = po + static_cast<std::size_t>(bc) * 4 * H * W;
        for (int i = 0; i < H; ++i) {
            for (int j = 0; j < W; ++j) {
                const float v = xi[i * W + j];
                const std::size_t base = (static_cast<std::size_t>(2 * i) * 2 * W) + 2 * j;
                oi[base] = v;
                oi[base + 1] = v;
                oi[base + 2 * W] = v;
                oi[base + 2 * W + 1] = v;
            }
        }
    }

    attach(out, {x}, [B, C, H, W](Tensor& o) {
        Tensor& px = o.node->parents[0];
        if (!px.requires_grad) return;
        const float* go = o.grad->data();
        float* gx = px.grad->data();
        for (int bc = 0; bc < B * C; ++bc) {
            const float* gi = go + static_cast<std::size_t>(bc) * 4 * H * W;
            float* xi = gx + static_cast<std::size_t>(bc) * H * W;
            for (int i = 0; i < H; ++i) {
                for (int j = 0; j < W; ++j) {
                    const std::size_t base = (static_cast<std::size_t>(2 * i) * 2 * W) + 2 * j;
                    xi[i * W + j] += gi[base] + gi[base + 1] + gi[base + 2 * W] + gi[base + 2 * W + 1];
                }
            }
        }
    });
    return out;
}

Tensor reshape(const Tensor& x, const std::vector<int>& new_shape) {
    if (numel_of(new_shape) != x.numel())
        throw std::runtime_error("reshape: numel mismatch " + shape_str(x.shape) + " -> " +
                                 shape_str(new_shape));
    Tensor out;
    out.shape = new_shape;
    out.data = x.data;  // view
    if (want_grad(x)) out.set_requires_grad(true);

    attach(out, {x}, [](Tensor& o) {
        Tensor& px = o.node->parents[0];
        if (!px.requires_grad) return;
        const float* go = o.grad->data();
        float* gx = px.grad->data();
        const std::size_t n = o.numel();
        for (std::size_t i = 0; i < n; ++i) gx[i] += go[i];
    });
    return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw std::runtime_error("concat: no inputs");
    const int r = parts[0].rank();
    if (axis < 0 || axis >= r) throw std::runtime_error("concat: invalid axis");
    std::vector<int> out_shape = parts[0].shape;
    int total = 0;
    bool rg = false;
    for (const Tensor& p : parts) {
        if (p.rank() != r) throw std::runtime_error("concat: rank mismatch");
        for (int d = 0; d < r; ++d)
            if (d != axis && p.shape[d] != out_shape[d])
                throw std::runtime_error("concat: shape mismatch off-axis");
        total += p.shape[axis];
        rg = rg || want_grad(p);
    }
    out_shape[axis] = total;

    std::size_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(out_shape[i]);
    for (int i = axis + 1; i < r; ++i) inner *= static_cast<std::size_t>(out_shape[i]);

    Tensor out = Tensor::zeros(out_shape, rg);
    float* po = out.ptr();
    std::size_t off = 0;
    for (const Tensor& p : parts) {
        const std::size_t chunk = static_cast<std::size_t>(p.shape[axis]) * inner;
        const float* pp = p.ptr();
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(pp + o * chunk, chunk,
                        po + o * static_cast<std::size_t>(total) * inner + off);
        off += chunk;
    }

    attach(out, parts, [outer, inner, total](Tensor& o) {
        const float* go = o.grad->data();
        std::size_t off = 0;
        for (Tensor& p : o.node->parents) {
            const std::size_t part_chunk = p.numel() / outer;
            if (p.requires_grad) {
                float* gp = p.grad->data();
                for (std::size_t ot = 0; ot < outer; ++ot) {
                    const float* src = go + ot * static_cast<std::size_t>(total) * inner + off;
                    float* dst = gp + ot * part_chunk;
                    for (std::size_t i = 0; i < part_chunk; ++i) dst[i] += src[i];
                }
            }
            off += part_chunk;
        }
    });
    return out;
}

Tensor slice(const Tensor& x, int axis, int start, int len) {
    const int r = x.rank();
    if (axis < 0 || axis >= r) throw std::runtime_error("slice: invalid axis");
    if (start < 0 || len <= 0 || start + len > x.shape[axis])
        throw std::runtime_error("slice: range out of bounds");
    std::vector<int> out_shape = x.shape;
    out_shape[axis] = len;

    std::size_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(x.shape[i]);
    for (int i = axis + 1; i < r; ++i) inner *= static_cast<std::size_t>(x.shape[i]);
    const std::size_t n_axis = static_cast<std::size_t>(x.shape[axis]);

    Tensor out = Tensor::zeros(out_shape, want_grad(x));
    const float* px = x.ptr();
    float* po = out.ptr();
    for (std::size_t o = 0; o < outer; ++o)
        std::copy_n(px + (o * n_axis + start) * inner, static_cast<std::size_t>(len) * inner,
                    po + o * len * inner);

    attach(out, {x}, [outer, inner, n_axis, start, len](Tensor& o) {
        Tensor& px = o.node->parents[0];
        if (!px.requires_grad) return;
        const float* go = o.grad->data();
        float* gx = px.grad->data();
        for (std::size_t ot = 0; ot < outer; ++ot) {
            const float* src = go + ot * len * inner;
            float* dst = gx + (ot * n_axis + start) * inner;
            for (std::size_t i = 0; i < static_cast<std::size_t>(len) * inner; ++i) dst[i] += src[i];
        }
    });
    return out;
}

Tensor sum(const Tensor& x) {
    const std::size_t n = x.numel();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += (*x.data)[i];
    Tensor out = Tensor::zeros({1}, want_grad(x));
    (*out.data)[0] = static_cast<float>(acc);
    check_finite(out, "sum");

    attach(out, {x}, [n](Tensor& o) {
        Tensor& px = o.node->parents[0];
        if (!px.requires_grad) return;
        const float g = (*o.grad)[0];
        float* gx = px.grad->data();
        for (std::size_t i = 0; i < n; ++i) gx[i] += g;
    });
    return out;
}

Tensor mean(const Tensor& x) {
    const std::size_t n = x.numel();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += (*x.data)[i];
    Tensor out = Tensor::zeros({1}, want_grad(x));
    (*out.data)[0] = static_cast<float>(acc / static_cast<double>(n));
    check_finite(out, "mean");

    attach(out, {x}, [n](Tensor& o) {
        Tensor& px = o.node->parents[0];
        if (!px.requires_grad) return;
        const float g = (*o.grad)[0] / static_cast<float>(n);
        float* gx = px.grad->data();
        for (std::size_t i = 0; i < n; ++i) gx[i] += g;
    });
    return out;
}

Tensor mean_axis(const Tensor& x, int axis) {
    const int r = x.rank();
    if (axis < 0 || axis >= r) throw std::runtime_error("mean_axis: invalid axis");
    std::vector<int> out_shape;
    for (int i = 0; i < r; ++i)
        if (i != axis) out_shape.push_back(x.shape[i]);
    if (out_shape.empty()) out_shape.push_back(1);

    std::size_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(x.shape[i]);
    for (int i = axis + 1; i < r; ++i) inner *= static_cast<std::size_t>(x.shape[i]);
    const int n = x.shape[axis];

    Tensor out = Tensor::zeros(out_shape, want_grad(x));
    const float* px = x.ptr();
    float* po = out.ptr();
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t j = 0; j < inner; ++j) {
            double acc = 0.0;
            for (int k = 0; k < n; ++k) acc += px[(o * n + k) * inner + j];
            po[o * inner + j] = static_cast<float>(acc / n);
        }
    }
    check_finite(out, "mean_axis");

    attach(out, {x}, [outer, inner, n](Tensor& o) {
        Tensor& px = o.node->parents[0];
        if (!px.requires_grad) return;
        const float* go = o.grad->data();
        float* gx = px.grad->data();
        for (std::size_t ot = 0; ot < outer; ++ot)
            for (std::size_t j = 0; j < inner; ++j) {
                const float g = go[ot * inner + j] / static_cast<float>(n);
                for (int k = 0; k < n; ++k) gx[(ot * n + k) * inner + j] += g;
            }
    });
    return out;
}

Tensor mse(const Tensor& a, const Tensor& b) {
    Tensor d = sub(a, b);
    return mean(mul(d, d));
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (w.rank() != 2) throw std::runtime_error("linear: weight must be [in,out]");
    Tensor x2 = (x.rank() == 1) ? reshape(x, {1, x.shape[0]}) : x;
    if (x2.rank() != 2 || x2.shape[1] != w.shape[0])
        throw std::runtime_error("linear: input dim mismatch " + shape_str(x.shape) + " vs " +
                                 shape_str(w.shape));
    Tensor y = matmul(x2, w);
    if (b.defined()) y = add(y, b);
    if (x.rank() == 1) y = reshape(y, {w.shape[1]});
    return y;
}

Tensor l2_normalize(const Tensor& v, float eps) {
    double ss = 0.0;
    for (float x : *v.data) ss += static_cast<double>(x) * x;
    const double inv = 1.0 / std::sqrt(std::max(ss, static_cast<double>(eps)));
    Tensor out = Tensor::zeros(v.shape);
    for (std::size_t i = 0; i < v.numel(); ++i)
        (*out.data)[i] = static_cast<float>((*v.data)[i] * inv);
    return out;
}

float cosine(const Tensor& a, const Tensor& b) {
    if (a.numel() != b.numel()) throw std::runtime_error("cosine: size mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double x = (*a.data)[i], y = (*b.data)[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) return 0.0f;
    return static_cast<float>(dot / (std::sqrt(na) * std::sqrt(nb)));
}

Tensor randn(const std::vector<int>& shape, Rng& rng, float stddev, bool requires_grad) {
    Tensor t = Tensor::zeros(shape, requires_grad);
    for (float& v : *t.data) v = rng.normal() * stddev;
    return t;
}

Tensor rand_uniform(const std::vector<int>& shape, Rng& rng, float lo, float hi,
                    bool requires_grad) {
    Tensor t = Tensor::zeros(shape, requires_grad);
    for (float& v : *t.data) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace idgen
