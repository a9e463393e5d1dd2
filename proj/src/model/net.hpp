#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "core/types.hpp"
#include "model/config.hpp"
#include "model/sampling.hpp"

namespace ooaf {

template <typename S>
using MatT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VecT = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
struct BlockParams {
    MatT<S> ln1_g, ln1_b;
    // no key bias: softmax is invariant to a shared shift of the scores,
    // so a key-projection bias would be unidentifiable (gradient is zero)
    MatT<S> wq, bq, wk, wv, bv, wo, bo;
    MatT<S> ln2_g, ln2_b;
    MatT<S> ff1_w, ff1_b, ff2_w, ff2_b;
};

template <typename S>
struct NetParams {
    MatT<S> enc1_w, enc1_b, enc2_w, enc2_b;
    MatT<S> proj_w, proj_b;
    MatT<S> pos1_w, pos1_b, pos2_w, pos2_b;
    std::vector<BlockParams<S>> blocks;
    MatT<S> head1_w, head1_b, head2_w, head2_b, head3_w, head3_b;
};

/// Enumerates every named tensor in a fixed order.
template <typename S, typename F>
void visit_params(NetParams<S>& p, F&& f) {
    f("enc1_w", p.enc1_w);
    f("enc1_b", p.enc1_b);
    f("enc2_w", p.enc2_w);
    f("enc2_b", p.enc2_b);
    f("proj_w", p.proj_w);
    f("proj_b", p.proj_b);
    f("pos1_w", p.pos1_w);
    f("pos1_b", p.pos1_b);
    f("pos2_w", p.pos2_w);
    f("pos2_b", p.pos2_b);
    for (size_t b = 0; b < p.blocks.size(); ++b) {
        auto& blk = p.blocks[b];
        const std::string prefix = "block" + std::to_string(b) + ".";
        f(prefix + "ln1_g", blk.ln1_g);
        f(prefix + "ln1_b", blk.ln1_b);
        f(prefix + "wq", blk.wq);
        f(prefix + "bq", blk.bq);
        f(prefix + "wk", blk.wk);
        f(prefix + "wv", blk.wv);
        f(prefix + "bv", blk.bv);
        f(prefix + "wo", blk.wo);
        f(prefix + "bo", blk.bo);
        f(prefix + "ln2_g", blk.ln2_g);
        f(prefix + "ln2_b", blk.ln2_b);
        f(prefix + "ff1_w", blk.ff1_w);
        f(prefix + "ff1_b", blk.ff1_b);
        f(prefix + "ff2_w", blk.ff2_w);
        f(prefix + "ff2_b", blk.ff2_b);
    }
    f("head1_w", p.head1_w);
    f("head1_b", p.head1_b);
    f("head2_w", p.head2_w);
    f("head2_b", p.head2_b);
    f("head3_w", p.head3_w);
    f("head3_b", p.head3_b);
}

template <typename S>
NetParams<S> allocate_params(const ModelConfig& cfg) {
    cfg.validate();
    const int in = 3 + cfg.feature_dim;
    const int h1 = cfg.patch_hidden[0];
    const int d = cfg.token_dim;
    NetParams<S> p;
    auto mat = [](int r, int c) { return MatT<S>::Zero(r, c); };
    p.enc1_w = mat(in, h1);
    p.enc1_b = mat(1, h1);
    p.enc2_w = mat(h1, d);
    p.enc2_b = mat(1, d);
    p.proj_w = mat(d + 2, d);
    p.proj_b = mat(1, d);
    p.pos1_w = mat(3, cfg.pos_dim);
    p.pos1_b = mat(1, cfg.pos_dim);
    p.pos2_w = mat(cfg.pos_dim, d);
    p.pos2_b = mat(1, d);
    p.blocks.resize(static_cast<size_t>(cfg.decoder_blocks));
    for (auto& blk : p.blocks) {
        blk.ln1_g = mat(1, d);
        blk.ln1_b = mat(1, d);
        blk.wq = mat(d, d);
        blk.bq = mat(1, d);
        blk.wk = mat(d, d);
        blk.wv = mat(d, d);
        blk.bv = mat(1, d);
        blk.wo = mat(d, d);
        blk.bo = mat(1, d);
        blk.ln2_g = mat(1, d);
        blk.ln2_b = mat(1, d);
        blk.ff1_w = mat(d, cfg.ff_hidden);
        blk.ff1_b = mat(1, cfg.ff_hidden);
        blk.ff2_w = mat(cfg.ff_hidden, d);
        blk.ff2_b = mat(1, d);
    }
    p.head1_w = mat(d, cfg.head_hidden[0]);
    p.head1_b = mat(1, cfg.head_hidden[0]);
    p.head2_w = mat(cfg.head_hidden[0], cfg.head_hidden[1]);
    p.head2_b = mat(1, cfg.head_hidden[1]);
    p.head3_w = mat(cfg.head_hidden[1], cfg.channels);
    p.head3_b = mat(1, cfg.channels);
    return p;
}

/// He-uniform init for linear weights, zeros for biases, ones for norm gains.
/// Draws happen in double so float and double nets share values bit-for-bit
/// up to the cast.
template <typename S>
NetParams<S> init_params(const ModelConfig& cfg) {
    NetParams<S> p = allocate_params<S>(cfg);
    std::mt19937_64 rng(cfg.seed ^ 0x243f6a8885a308d3ull);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    visit_params(p, [&](const std::string& name, MatT<S>& m) {
        const bool is_norm = name.find("ln") != std::string::npos;
        const bool is_bias = name.size() > 1 && (name.ends_with("_b") || name.ends_with(".bq") ||
                                                 name.ends_with(".bv") ||
                                                 name.ends_with(".bo"));
        if (is_norm) {
            m.setConstant(name.ends_with("_g") ? S(1) : S(0));
        } else if (is_bias || m.rows() == 1) {
            m.setZero();
        } else {
            double limit = std::sqrt(6.0 / static_cast<double>(m.rows()));
            for (Eigen::Index i = 0; i < m.rows(); ++i)
                for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<S>(limit * uni(rng));
        }
    });
    return p;
}

// ---------------------------------------------------------------------------
// geometry preparation (scalar-independent)

struct PreparedObject {
    MatX patch_rows;                // (T*k) x (3+n), coordinates center-relative
    MatX centers;                   // T x 3
    std::vector<int> center_index;  // T indices into the cloud
    std::vector<int> assign;        // point -> nearest center
    int n_points = 0;
};

/// Expects a cloud already normalized to the unit ball.
inline PreparedObject prepare_object(const FeatureCloud& cloud, const ModelConfig& cfg) {
    PreparedObject po;
    po.n_points = static_cast<int>(cloud.size());
    po.center_index = fps(cloud.points, cfg.num_groups);
    po.centers.resize(cfg.num_groups, 3);
    for (int t = 0; t < cfg.num_groups; ++t)
        po.centers.row(t) = cloud.points.row(po.center_index[static_cast<size_t>(t)]);
    auto groups = knn_group(cloud.points, po.centers, cfg.group_size, cfg.group_radius);
    const int in = 3 + static_cast<int>(cloud.feature_dim());
    po.patch_rows.resize(static_cast<Eigen::Index>(cfg.num_groups) * cfg.group_size, in);
    for (int t = 0; t < cfg.num_groups; ++t)
        for (int j = 0; j < cfg.group_size; ++j) {
            int idx = groups[static_cast<size_t>(t)][static_cast<size_t>(j)];
            Eigen::Index row = static_cast<Eigen::Index>(t) * cfg.group_size + j;
            po.patch_rows.block(row, 0, 1, 3) = cloud.points.row(idx) - po.centers.row(t);
            if (cloud.feature_dim() > 0)
                po.patch_rows.block(row, 3, 1, cloud.feature_dim()) = cloud.features.row(idx);
        }
    po.assign = nearest_center(cloud.points, po.centers);
    return po;
}

// ---------------------------------------------------------------------------
// activations

template <typename S>
S gelu(S x) {
    return S(0.5) * x * (S(1) + std::erf(x / S(std::sqrt(2.0))));
}

template <typename S>
S gelu_grad(S x) {
    constexpr double inv_sqrt2pi = 0.3989422804014327;
    return S(0.5) * (S(1) + std::erf(x / S(std::sqrt(2.0)))) +
           x * S(inv_sqrt2pi) * std::exp(S(-0.5) * x * x);
}

template <typename S>
MatT<S> gelu_mat(const MatT<S>& x) {
    return x.unaryExpr([](S v) { return gelu(v); });
}

// ---------------------------------------------------------------------------
// caches

template <typename S>
struct LnCache {
    MatT<S> xhat;       // normalized rows
    VecT<S> inv_std;    // per row
};

template <typename S>
struct AttnCache {
    MatT<S> q_in, kv_in;             // the (layer-normed) inputs
    MatT<S> q, k, v;                 // T x D
    std::vector<MatT<S>> probs;      // per head, post-softmax
    std::vector<MatT<S>> drop_mask;  // empty in eval mode
    MatT<S> concat;                  // heads concatenated, pre-output-projection
};

template <typename S>
struct BlockCache {
    MatT<S> s_in, t_in;
    LnCache<S> ln1_s, ln1_t;
    MatT<S> sn, tn;
    AttnCache<S> att_s, att_t;
    MatT<S> s1, t1;
    LnCache<S> ln2_s, ln2_t;
    MatT<S> s1n, t1n;
    MatT<S> f1_s, f1_t;  // pre-GELU FF hidden
    MatT<S> s2, t2;
};

template <typename S>
struct ObjCache {
    MatT<S> x;                // Tk x (3+n)
    MatT<S> a1, a2;           // pre-activation patch layers
    MatT<S> pooled;           // T x D
    std::vector<int> argmax;  // T*D winning row offsets (0..k-1)
    MatT<S> concat;           // T x (D+2)
    MatT<S> b1;               // T x pos_dim pre-GELU
    MatT<S> z0;               // tokenizer output T x D
    MatT<S> h1, h2;           // head pre-activations
    MatT<S> sig;              // T x K
};

template <typename S>
struct Forward {
    ObjCache<S> src, tgt;
    std::vector<BlockCache<S>> blocks;
    MatT<S> h_src, h_tgt;  // decoder outputs T x D
};

// ---------------------------------------------------------------------------
// network

template <typename S>
class Net {
  public:
    ModelConfig cfg;
    NetParams<S> params;

    Net() = default;
    explicit Net(const ModelConfig& c) : cfg(c), params(init_params<S>(c)) {}

    /// Full forward for one prepared pair. When `train` is set and dropout is
    /// positive, `rng` drives the attention-probability dropout masks.
    Forward<S> forward(const PreparedObject& src, const PreparedObject& tgt, bool train,
                       std::mt19937_64* rng = nullptr) const {
        Forward<S> f;
        f.src = tokenize(src, /*role=*/0);
        f.tgt = tokenize(tgt, /*role=*/1);
        MatT<S> s = f.src.z0, t = f.tgt.z0;
        f.blocks.resize(static_cast<size_t>(cfg.decoder_blocks));
        for (int b = 0; b < cfg.decoder_blocks; ++b) {
            decode_block(params.blocks[static_cast<size_t>(b)], s, t,
                         f.blocks[static_cast<size_t>(b)], train, rng);
            s = f.blocks[static_cast<size_t>(b)].s2;
            t = f.blocks[static_cast<size_t>(b)].t2;
        }
        f.h_src = s;
        f.h_tgt = t;
        head(f.src, f.h_src);
        head(f.tgt, f.h_tgt);
        return f;
    }

    /// Tokenizer output only (used by the patch-embedding export).
    MatT<S> tokenizer_tokens(const PreparedObject& po, int role) const {
        return tokenize(po, role).z0;
    }

    /// Per-point affordance map: each point reads its nearest center's output.
    MatT<S> per_point_map(const ObjCache<S>& obj, const PreparedObject& po) const {
        MatT<S> map(po.n_points, cfg.channels);
        for (int i = 0; i < po.n_points; ++i)
            map.row(i) = obj.sig.row(po.assign[static_cast<size_t>(i)]);
        return map;
    }

    /// Backward from per-center sigmoid-output gradients; accumulates into g.
    void backward(const Forward<S>& f, const PreparedObject& src, const PreparedObject& tgt,
                  const MatT<S>& dsig_src, const MatT<S>& dsig_tgt, NetParams<S>& g) const {
        MatT<S> dh_src = head_backward(f.src, f.h_src, dsig_src, g);
        MatT<S> dh_tgt = head_backward(f.tgt, f.h_tgt, dsig_tgt, g);
        for (int b = cfg.decoder_blocks - 1; b >= 0; --b) {
            decode_block_backward(params.blocks[static_cast<size_t>(b)],
                                  f.blocks[static_cast<size_t>(b)],
                                  g.blocks[static_cast<size_t>(b)], dh_src, dh_tgt);
        }
        tokenize_backward(f.src, src, 0, dh_src, g);
        tokenize_backward(f.tgt, tgt, 1, dh_tgt, g);
    }

  private:
    ObjCache<S> tokenize(const PreparedObject& po, int role) const {
        const int t_count = cfg.num_groups;
        const int k = cfg.group_size;
        const int d = cfg.token_dim;
        ObjCache<S> o;
        o.x = po.patch_rows.template cast<S>();
        o.a1 = (o.x * params.enc1_w).rowwise() + params.enc1_b.row(0);
        MatT<S> g1 = gelu_mat<S>(o.a1);
        o.a2 = (g1 * params.enc2_w).rowwise() + params.enc2_b.row(0);
        o.pooled.resize(t_count, d);
        o.argmax.assign(static_cast<size_t>(t_count) * static_cast<size_t>(d), 0);
        for (int t = 0; t < t_count; ++t)
            for (int c = 0; c < d; ++c) {
                S best = o.a2(static_cast<Eigen::Index>(t) * k, c);
                int best_j = 0;
                for (int j = 1; j < k; ++j) {
                    S v = o.a2(static_cast<Eigen::Index>(t) * k + j, c);
                    if (v > best) {
                        best = v;
                        best_j = j;
                    }
                }
                o.pooled(t, c) = best;
                o.argmax[static_cast<size_t>(t) * static_cast<size_t>(d) +
                         static_cast<size_t>(c)] = best_j;
            }
        o.concat.resize(t_count, d + 2);
        o.concat.leftCols(d) = o.pooled;
        o.concat.col(d).setConstant(role == 0 ? S(1) : S(0));
        o.concat.col(d + 1).setConstant(role == 0 ? S(0) : S(1));
        MatT<S> zp = (o.concat * params.proj_w).rowwise() + params.proj_b.row(0);
        MatT<S> centers = po.centers.template cast<S>();
        o.b1 = (centers * params.pos1_w).rowwise() + params.pos1_b.row(0);
        MatT<S> b2 = (gelu_mat<S>(o.b1) * params.pos2_w).rowwise() + params.pos2_b.row(0);
        o.z0 = zp + b2;
        return o;
    }

    void tokenize_backward(const ObjCache<S>& o, const PreparedObject& po, int /*role*/,
                           const MatT<S>& dz0, NetParams<S>& g) const {
        const int t_count = cfg.num_groups;
        const int k = cfg.group_size;
        const int d = cfg.token_dim;
        // positional branch
        MatT<S> centers = po.centers.template cast<S>();
        MatT<S> gp = gelu_mat<S>(o.b1);
        g.pos2_w += gp.transpose() * dz0;
        g.pos2_b += dz0.colwise().sum();
        MatT<S> dgp = dz0 * params.pos2_w.transpose();
        MatT<S> db1 = dgp.cwiseProduct(o.b1.unaryExpr([](S v) { return gelu_grad(v); }));
        g.pos1_w += centers.transpose() * db1;
        g.pos1_b += db1.colwise().sum();
        // projection branch
        g.proj_w += o.concat.transpose() * dz0;
        g.proj_b += dz0.colwise().sum();
        MatT<S> dconcat = dz0 * params.proj_w.transpose();
        // unpool
        MatT<S> da2 = MatT<S>::Zero(o.a2.rows(), o.a2.cols());
        for (int t = 0; t < t_count; ++t)
            for (int c = 0; c < d; ++c) {
                int j = o.argmax[static_cast<size_t>(t) * static_cast<size_t>(d) +
                                 static_cast<size_t>(c)];
                da2(static_cast<Eigen::Index>(t) * k + j, c) += dconcat(t, c);
            }
        MatT<S> g1 = gelu_mat<S>(o.a1);
        g.enc2_w += g1.transpose() * da2;
        g.enc2_b += da2.colwise().sum();
        MatT<S> dg1 = da2 * params.enc2_w.transpose();
        MatT<S> da1 = dg1.cwiseProduct(o.a1.unaryExpr([](S v) { return gelu_grad(v); }));
        g.enc1_w += o.x.transpose() * da1;
        g.enc1_b += da1.colwise().sum();
    }

    MatT<S> layer_norm(const MatT<S>& x, const MatT<S>& gain, const MatT<S>& bias,
                       LnCache<S>& cache) const {
        const auto eps = static_cast<S>(cfg.norm_epsilon);
        cache.xhat.resize(x.rows(), x.cols());
        cache.inv_std.resize(x.rows());
        MatT<S> out(x.rows(), x.cols());
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            S mean = x.row(r).mean();
            S var = (x.row(r).array() - mean).square().mean();
            S inv = S(1) / std::sqrt(var + eps);
            cache.inv_std[r] = inv;
            cache.xhat.row(r) = (x.row(r).array() - mean) * inv;
            out.row(r) =
                cache.xhat.row(r).cwiseProduct(gain.row(0)) + bias.row(0);
        }
        return out;
    }

    MatT<S> layer_norm_backward(const MatT<S>& dy, const LnCache<S>& cache, const MatT<S>& gain,
                                MatT<S>& dgain, MatT<S>& dbias) const {
        dgain += dy.cwiseProduct(cache.xhat).colwise().sum();
        dbias += dy.colwise().sum();
        MatT<S> dx(dy.rows(), dy.cols());
        const auto d = static_cast<S>(dy.cols());
        for (Eigen::Index r = 0; r < dy.rows(); ++r) {
            Eigen::Matrix<S, 1, Eigen::Dynamic> dxhat = dy.row(r).cwiseProduct(gain.row(0));
            S m1 = dxhat.mean();
            S m2 = dxhat.cwiseProduct(cache.xhat.row(r)).mean();
            dx.row(r) = cache.inv_std[r] *
                        (dxhat.array() - m1 - cache.xhat.row(r).array() * m2).matrix();
            (void)d;
        }
        return dx;
    }

    // scaled dot-product attention with shared weights for both directions
    MatT<S> attention(const BlockParams<S>& bp, const MatT<S>& q_in, const MatT<S>& kv_in,
                      AttnCache<S>& cache, bool train, std::mt19937_64* rng) const {
        const int d = cfg.token_dim;
        const int h = cfg.heads;
        const int dh = d / h;
        const auto scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
        cache.q_in = q_in;
        cache.kv_in = kv_in;
        cache.q = (q_in * bp.wq).rowwise() + bp.bq.row(0);
        cache.k = kv_in * bp.wk;
        cache.v = (kv_in * bp.wv).rowwise() + bp.bv.row(0);
        cache.probs.resize(static_cast<size_t>(h));
        const bool dropping = train && cfg.dropout > 0.0;
        if (dropping) cache.drop_mask.resize(static_cast<size_t>(h));
        cache.concat.resize(q_in.rows(), d);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        for (int head = 0; head < h; ++head) {
            auto qh = cache.q.middleCols(head * dh, dh);
            auto kh = cache.k.middleCols(head * dh, dh);
            auto vh = cache.v.middleCols(head * dh, dh);
            MatT<S> scores = qh * kh.transpose() * scale;
            MatT<S>& probs = cache.probs[static_cast<size_t>(head)];
            probs.resize(scores.rows(), scores.cols());
            for (Eigen::Index r = 0; r < scores.rows(); ++r) {
                S mx = scores.row(r).maxCoeff();
                Eigen::Matrix<S, 1, Eigen::Dynamic> e =
                    (scores.row(r).array() - mx).exp().matrix();
                probs.row(r) = e / e.sum();
            }
            if (dropping) {
                MatT<S>& mask = cache.drop_mask[static_cast<size_t>(head)];
                mask.resize(probs.rows(), probs.cols());
                const auto keep = static_cast<S>(1.0 - cfg.dropout);
                for (Eigen::Index r = 0; r < mask.rows(); ++r)
                    for (Eigen::Index c = 0; c < mask.cols(); ++c)
                        mask(r, c) = uni(*rng) < cfg.dropout ? S(0) : S(1) / keep;
                cache.concat.middleCols(head * dh, dh) = probs.cwiseProduct(mask) * vh;
            } else {
                cache.concat.middleCols(head * dh, dh) = probs * vh;
            }
        }
        return (cache.concat * bp.wo).rowwise() + bp.bo.row(0);
    }

    // returns (d_q_in, d_kv_in)
    std::pair<MatT<S>, MatT<S>> attention_backward(const BlockParams<S>& bp,
                                                   const AttnCache<S>& cache, const MatT<S>& datt,
                                                   BlockParams<S>& g) const {
        const int d = cfg.token_dim;
        const int h = cfg.heads;
        const int dh = d / h;
        const auto scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
        g.wo += cache.concat.transpose() * datt;
        g.bo += datt.colwise().sum();
        MatT<S> dconcat = datt * bp.wo.transpose();
        MatT<S> dq = MatT<S>::Zero(cache.q.rows(), d);
        MatT<S> dk = MatT<S>::Zero(cache.k.rows(), d);
        MatT<S> dv = MatT<S>::Zero(cache.v.rows(), d);
        const bool dropped = !cache.drop_mask.empty();
        for (int head = 0; head < h; ++head) {
            auto qh = cache.q.middleCols(head * dh, dh);
            auto kh = cache.k.middleCols(head * dh, dh);
            auto vh = cache.v.middleCols(head * dh, dh);
            const MatT<S>& probs = cache.probs[static_cast<size_t>(head)];
            MatT<S> doh = dconcat.middleCols(head * dh, dh);
            MatT<S> dprobs_used = doh * vh.transpose();
            MatT<S> probs_used = probs;
            if (dropped) {
                const MatT<S>& mask = cache.drop_mask[static_cast<size_t>(head)];
                probs_used = probs.cwiseProduct(mask);
                dv.middleCols(head * dh, dh) = probs_used.transpose() * doh;
                dprobs_used = dprobs_used.cwiseProduct(mask);
            } else {
                dv.middleCols(head * dh, dh) = probs.transpose() * doh;
            }
            // softmax backward row-wise
            MatT<S> dscores(probs.rows(), probs.cols());
            for (Eigen::Index r = 0; r < probs.rows(); ++r) {
                S dot = probs.row(r).cwiseProduct(dprobs_used.row(r)).sum();
                dscores.row(r) =
                    probs.row(r).cwiseProduct((dprobs_used.row(r).array() - dot).matrix());
            }
            dq.middleCols(head * dh, dh) = dscores * kh * scale;
            dk.middleCols(head * dh, dh) = dscores.transpose() * qh * scale;
        }
        g.wq += cache.q_in.transpose() * dq;
        g.bq += dq.colwise().sum();
        g.wk += cache.kv_in.transpose() * dk;
        g.wv += cache.kv_in.transpose() * dv;
        g.bv += dv.colwise().sum();
        MatT<S> d_q_in = dq * bp.wq.transpose();
        MatT<S> d_kv_in = dk * bp.wk.transpose() + dv * bp.wv.transpose();
        return {d_q_in, d_kv_in};
    }

    void decode_block(const BlockParams<S>& bp, const MatT<S>& s_in, const MatT<S>& t_in,
                      BlockCache<S>& c, bool train, std::mt19937_64* rng) const {
        c.s_in = s_in;
        c.t_in = t_in;
        c.sn = layer_norm(s_in, bp.ln1_g, bp.ln1_b, c.ln1_s);
        c.tn = layer_norm(t_in, bp.ln1_g, bp.ln1_b, c.ln1_t);
        // both directions read the block's input tokens (simultaneous update)
        MatT<S> att_s, att_t;
        if (cfg.cross_attention) {
            att_s = attention(bp, c.sn, c.tn, c.att_s, train, rng);
            att_t = attention(bp, c.tn, c.sn, c.att_t, train, rng);
        } else {
            att_s = attention(bp, c.sn, c.sn, c.att_s, train, rng);
            att_t = attention(bp, c.tn, c.tn, c.att_t, train, rng);
        }
        c.s1 = s_in + att_s;
        c.t1 = t_in + att_t;
        c.s1n = layer_norm(c.s1, bp.ln2_g, bp.ln2_b, c.ln2_s);
        c.t1n = layer_norm(c.t1, bp.ln2_g, bp.ln2_b, c.ln2_t);
        c.f1_s = (c.s1n * bp.ff1_w).rowwise() + bp.ff1_b.row(0);
        c.f1_t = (c.t1n * bp.ff1_w).rowwise() + bp.ff1_b.row(0);
        c.s2 = c.s1 + ((gelu_mat<S>(c.f1_s) * bp.ff2_w).rowwise() + bp.ff2_b.row(0));
        c.t2 = c.t1 + ((gelu_mat<S>(c.f1_t) * bp.ff2_w).rowwise() + bp.ff2_b.row(0));
    }

    void decode_block_backward(const BlockParams<S>& bp, const BlockCache<S>& c, BlockParams<S>& g,
                               MatT<S>& ds, MatT<S>& dt) const {
        auto ff_backward = [&](const MatT<S>& d_out, const MatT<S>& x1n, const MatT<S>& f1) {
            MatT<S> gf = gelu_mat<S>(f1);
            g.ff2_w += gf.transpose() * d_out;
            g.ff2_b += d_out.colwise().sum();
            MatT<S> dgf = d_out * bp.ff2_w.transpose();
            MatT<S> df1 = dgf.cwiseProduct(f1.unaryExpr([](S v) { return gelu_grad(v); }));
            g.ff1_w += x1n.transpose() * df1;
            g.ff1_b += df1.colwise().sum();
            return MatT<S>(df1 * bp.ff1_w.transpose());
        };
        // ds, dt arrive as gradients w.r.t. s2/t2
        MatT<S> ds1 = ds;
        ds1 += layer_norm_backward(ff_backward(ds, c.s1n, c.f1_s), c.ln2_s, bp.ln2_g, g.ln2_g,
                                   g.ln2_b);
        MatT<S> dt1 = dt;
        dt1 += layer_norm_backward(ff_backward(dt, c.t1n, c.f1_t), c.ln2_t, bp.ln2_g, g.ln2_g,
                                   g.ln2_b);

        MatT<S> ds_in = ds1;
        MatT<S> dt_in = dt1;
        MatT<S> dsn = MatT<S>::Zero(ds1.rows(), ds1.cols());
        MatT<S> dtn = MatT<S>::Zero(dt1.rows(), dt1.cols());
        if (cfg.cross_attention) {
            auto [dq_s, dkv_t] = attention_backward(bp, c.att_s, ds1, g);
            auto [dq_t, dkv_s] = attention_backward(bp, c.att_t, dt1, g);
            dsn = dq_s + dkv_s;
            dtn = dq_t + dkv_t;
        } else {
            auto [dq_s, dkv_s] = attention_backward(bp, c.att_s, ds1, g);
            auto [dq_t, dkv_t] = attention_backward(bp, c.att_t, dt1, g);
            dsn = dq_s + dkv_s;
            dtn = dq_t + dkv_t;
        }
        ds_in += layer_norm_backward(dsn, c.ln1_s, bp.ln1_g, g.ln1_g, g.ln1_b);
        dt_in += layer_norm_backward(dtn, c.ln1_t, bp.ln1_g, g.ln1_g, g.ln1_b);
        ds = ds_in;
        dt = dt_in;
    }

    void head(ObjCache<S>& o, const MatT<S>& h_tokens) const {
        o.h1 = (h_tokens * params.head1_w).rowwise() + params.head1_b.row(0);
        o.h2 = (gelu_mat<S>(o.h1) * params.head2_w).rowwise() + params.head2_b.row(0);
        MatT<S> logits = (gelu_mat<S>(o.h2) * params.head3_w).rowwise() + params.head3_b.row(0);
        o.sig = logits.unaryExpr([](S v) { return S(1) / (S(1) + std::exp(-v)); });
    }

    /// dsig arrives as gradient w.r.t. the pre-sigmoid logits already
    /// multiplied by sigmoid'(=(p - y) form for BCE); see loss helpers.
    MatT<S> head_backward(const ObjCache<S>& o, const MatT<S>& h_tokens, const MatT<S>& dlogits,
                          NetParams<S>& g) const {
        MatT<S> g2 = gelu_mat<S>(o.h2);
        g.head3_w += g2.transpose() * dlogits;
        g.head3_b += dlogits.colwise().sum();
        MatT<S> dg2 = dlogits * params.head3_w.transpose();
        MatT<S> dh2 = dg2.cwiseProduct(o.h2.unaryExpr([](S v) { return gelu_grad(v); }));
        MatT<S> g1 = gelu_mat<S>(o.h1);
        g.head2_w += g1.transpose() * dh2;
        g.head2_b += dh2.colwise().sum();
        MatT<S> dg1 = dh2 * params.head2_w.transpose();
        MatT<S> dh1 = dg1.cwiseProduct(o.h1.unaryExpr([](S v) { return gelu_grad(v); }));
        g.head1_w += h_tokens.transpose() * dh1;
        g.head1_b += dh1.colwise().sum();
        return dh1 * params.head1_w.transpose();
    }
};

// ---------------------------------------------------------------------------
// loss

/// -(1/N) sum [y log p + (1-y) log(1-p)], p clamped to [1e-7, 1-1e-7].
double bce_loss(const VecX& pred, const VecX& gt);

/// Loss over the per-point map of one channel plus the gradient w.r.t. the
/// per-center logits (chain through sigmoid folded in as p - y).
template <typename S>
S channel_bce_with_logit_grad(const MatT<S>& sig, const std::vector<int>& assign, int channel,
                              const VecT<S>& gt, S weight, MatT<S>& dlogits) {
    const auto n = static_cast<Eigen::Index>(assign.size());
    S loss = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        S p = sig(assign[static_cast<size_t>(i)], channel);
        S pc = std::clamp(p, S(1e-7), S(1) - S(1e-7));
        S y = gt[i];
        loss -= y * std::log(pc) + (S(1) - y) * std::log(S(1) - pc);
        dlogits(assign[static_cast<size_t>(i)], channel) += weight * (p - y) / static_cast<S>(n);
    }
    return weight * loss / static_cast<S>(n);
}

}  // namespace ooaf
