#include "rw/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "rw/io.hpp"

namespace rw::nn {

std::string Shape::str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
    os << "]";
    return os.str();
}

namespace {

const char* kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Dense: return "Dense";
        case LayerKind::Conv2d: return "Conv2d";
        case LayerKind::MaxPool2d: return "MaxPool2d";
        case LayerKind::Relu: return "Relu";
        case LayerKind::Tanh: return "Tanh";
        case LayerKind::Flatten: return "Flatten";
        case LayerKind::Softmax: return "Softmax";
    }
    return "?";
}

[[noreturn]] void layer_error(std::size_t idx, LayerKind k, const std::string& msg) {
    throw ContractError("layer " + std::to_string(idx) + " (" + kind_name(k) + "): " + msg);
}

Shape chain_shape(std::size_t idx, const LayerSpec& l, const Shape& in) {
    switch (l.kind) {
        case LayerKind::Dense:
            if (in.flat() != l.in)
                layer_error(idx, l.kind, "expects " + std::to_string(l.in) + " inputs, got " + in.str());
            return Shape{{l.out}};
        case LayerKind::Conv2d:
            if (in.dims.size() != 3 || in.dims[0] != l.in)
                layer_error(idx, l.kind, "expects [" + std::to_string(l.in) + ",H,W], got " + in.str());
            return Shape{{l.out, in.dims[1], in.dims[2]}};
        case LayerKind::MaxPool2d:
            if (in.dims.size() != 3 || in.dims[1] < 2 || in.dims[2] < 2)
                layer_error(idx, l.kind, "expects [C,H>=2,W>=2], got " + in.str());
            return Shape{{in.dims[0], in.dims[1] / 2, in.dims[2] / 2}};
        case LayerKind::Flatten:
            return Shape{{in.flat()}};
        case LayerKind::Relu:
        case LayerKind::Tanh:
        case LayerKind::Softmax:
            return in;
    }
    layer_error(idx, l.kind, "unknown kind");
}

}  // namespace

int Network::param_count() const {
    int n = 0;
    for (std::size_t i = 0; i < layers.size(); ++i)
        n += static_cast<int>(weights[i].size() + biases[i].size());
    return n;
}

Network build_network(Shape input, std::vector<LayerSpec> layers, std::uint64_t seed) {
    if (layers.empty()) throw ContractError("network needs at least one layer");
    Network net;
    net.input_shape = std::move(input);
    net.layers = std::move(layers);
    net.init_seed = seed;

    std::mt19937_64 rng(seed);
    Shape cur = net.input_shape;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& l = net.layers[i];
        cur = chain_shape(i, l, cur);
        net.out_shapes.push_back(cur);
        Mat w;
        Vec b;
        int fan_in = 0, fan_out = 0;
        if (l.kind == LayerKind::Dense) {
            w.resize(l.out, l.in);
            b = Vec::Zero(l.out);
            fan_in = l.in;
            fan_out = l.out;
        } else if (l.kind == LayerKind::Conv2d) {
            w.resize(l.out, l.in * 9);
            b = Vec::Zero(l.out);
            fan_in = l.in * 9;
            fan_out = l.out * 9;
        }
        if (w.size() > 0) {
            double bound = std::sqrt(6.0 / (fan_in + fan_out));
            std::uniform_real_distribution<double> u(-bound, bound);
            for (Eigen::Index j = 0; j < w.size(); ++j) w.data()[j] = u(rng);
        }
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    return net;
}

Mat softmax_rows(const Mat& logits) {
    Mat p = logits;
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        double mx = p.row(r).maxCoeff();
        p.row(r) = (p.row(r).array() - mx).exp();
        p.row(r) /= p.row(r).sum();
    }
    return p;
}

namespace {

// im2col for a 3x3/stride1/same conv. Output: (C*9) x (B*H*W); column order is
// sample-major, then y*W+x.
Mat im2col(const Mat& input, int C, int H, int W) {
    const Eigen::Index B = input.rows();
    const int HW = H * W;
    Mat K = Mat::Zero(C * 9, B * HW);
    for (Eigen::Index b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const int row = c * 9 + ky * 3 + kx;
                    for (int y = 0; y < H; ++y) {
                        const int iy = y + ky - 1;
                        if (iy < 0 || iy >= H) continue;
                        for (int x = 0; x < W; ++x) {
                            const int ix = x + kx - 1;
                            if (ix < 0 || ix >= W) continue;
                            K(row, b * HW + y * W + x) = input(b, (c * H + iy) * W + ix);
                        }
                    }
                }
            }
        }
    }
    return K;
}

// Transpose of im2col: scatter-add columns back into image gradients.
void col2im_add(const Mat& dK, int C, int H, int W, Mat& dinput) {
    const Eigen::Index B = dinput.rows();
    const int HW = H * W;
    for (Eigen::Index b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const int row = c * 9 + ky * 3 + kx;
                    for (int y = 0; y < H; ++y) {
                        const int iy = y + ky - 1;
                        if (iy < 0 || iy >= H) continue;
                        for (int x = 0; x < W; ++x) {
                            const int ix = x + kx - 1;
                            if (ix < 0 || ix >= W) continue;
                            dinput(b, (c * H + iy) * W + ix) += dK(row, b * HW + y * W + x);
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

Mat forward(const Network& net, const Mat& input, Tape* tape) {
    if (input.cols() != net.input_shape.flat())
        throw ContractError("forward: input has " + std::to_string(input.cols()) +
                            " features, network expects " + std::to_string(net.input_shape.flat()));
    if (tape) {
        tape->acts.clear();
        tape->acts.reserve(net.layers.size() + 1);
        tape->pool_argmax.assign(net.layers.size(), {});
        tape->acts.push_back(input);
    }

    Mat cur = input;
    Shape in_shape = net.input_shape;
    const Eigen::Index B = input.rows();
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const LayerSpec& spec = net.layers[l];
        const Shape& out_shape = net.out_shapes[l];
        Mat next;
        switch (spec.kind) {
            case LayerKind::Dense:
                next.noalias() = cur * net.weights[l].transpose();
                next.rowwise() += net.biases[l].transpose();
                break;
            case LayerKind::Conv2d: {
                const int C = in_shape.dims[0], H = in_shape.dims[1], W = in_shape.dims[2];
                const int HW = H * W;
                Mat K = im2col(cur, C, H, W);
                Mat out;
                out.noalias() = net.weights[l] * K;  // out_ch x (B*HW)
                next.resize(B, out_shape.flat());
                for (Eigen::Index b = 0; b < B; ++b)
                    for (int oc = 0; oc < spec.out; ++oc)
                        for (int i = 0; i < HW; ++i)
                            next(b, oc * HW + i) = out(oc, b * HW + i) + net.biases[l][oc];
                break;
            }
            case LayerKind::MaxPool2d: {
                const int C = in_shape.dims[0], H = in_shape.dims[1], W = in_shape.dims[2];
                const int OH = out_shape.dims[1], OW = out_shape.dims[2];
                next.resize(B, out_shape.flat());
                Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> argmax(B, out_shape.flat());
                for (Eigen::Index b = 0; b < B; ++b) {
                    for (int c = 0; c < C; ++c) {
                        for (int oy = 0; oy < OH; ++oy) {
                            for (int ox = 0; ox < OW; ++ox) {
                                double best = -std::numeric_limits<double>::infinity();
                                int best_idx = -1;
                                for (int dy = 0; dy < 2; ++dy) {
                                    for (int dx = 0; dx < 2; ++dx) {
                                        int idx = (c * H + 2 * oy + dy) * W + 2 * ox + dx;
                                        if (cur(b, idx) > best) {
                                            best = cur(b, idx);
                                            best_idx = idx;
                                        }
                                    }
                                }
                                int oidx = (c * OH + oy) * OW + ox;
                                next(b, oidx) = best;
                                argmax(b, oidx) = best_idx;
                            }
                        }
                    }
                }
                if (tape) tape->pool_argmax[l] = std::move(argmax);
                break;
            }
            case LayerKind::Relu:
                next = cur.cwiseMax(0.0);
                break;
            case LayerKind::Tanh:
                next = cur.array().tanh();
                break;
            case LayerKind::Flatten:
                next = cur;
                break;
            case LayerKind::Softmax:
                next = softmax_rows(cur);
                break;
        }
        cur = std::move(next);
        in_shape = out_shape;
        if (tape) tape->acts.push_back(cur);
    }
    return cur;
}

Gradients zero_gradients(const Network& net) {
    Gradients g;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        g.w.push_back(Mat::Zero(net.weights[l].rows(), net.weights[l].cols()));
        g.b.push_back(Vec::Zero(net.biases[l].size()));
    }
    return g;
}

Gradients backward(const Network& net, const Tape& tape, const Mat& dout,
                   Mat* dinput, int from_layer) {
    const int L = from_layer < 0 ? static_cast<int>(net.layers.size()) - 1 : from_layer;
    if (tape.acts.size() != net.layers.size() + 1)
        throw ContractError("backward: tape does not match this network (stale or foreign tape)");
    if (dout.rows() != tape.acts[0].rows() || dout.cols() != net.out_shapes[L].flat())
        throw ContractError("backward: dout shape mismatch at layer " + std::to_string(L));

    Gradients g = zero_gradients(net);
    Mat d = dout;
    const Eigen::Index B = dout.rows();
    for (int l = L; l >= 0; --l) {
        const LayerSpec& spec = net.layers[l];
        const Shape& in_shape = (l == 0) ? net.input_shape : net.out_shapes[l - 1];
        const Mat& x = tape.acts[l];
        const Mat& y = tape.acts[l + 1];
        Mat dprev;
        switch (spec.kind) {
            case LayerKind::Dense:
                g.w[l].noalias() = d.transpose() * x;
                g.b[l] = d.colwise().sum();
                dprev.noalias() = d * net.weights[l];
                break;
            case LayerKind::Conv2d: {
                const int C = in_shape.dims[0], H = in_shape.dims[1], W = in_shape.dims[2];
                const int HW = H * W;
                Mat dOut(spec.out, B * HW);
                for (Eigen::Index b = 0; b < B; ++b)
                    for (int oc = 0; oc < spec.out; ++oc)
                        for (int i = 0; i < HW; ++i)
                            dOut(oc, b * HW + i) = d(b, oc * HW + i);
                Mat K = im2col(x, C, H, W);
                g.w[l].noalias() = dOut * K.transpose();
                g.b[l] = dOut.rowwise().sum();
                Mat dK;
                dK.noalias() = net.weights[l].transpose() * dOut;
                dprev = Mat::Zero(B, in_shape.flat());
                col2im_add(dK, C, H, W, dprev);
                break;
            }
            case LayerKind::MaxPool2d: {
                dprev = Mat::Zero(B, in_shape.flat());
                const auto& argmax = tape.pool_argmax[l];
                for (Eigen::Index b = 0; b < B; ++b)
                    for (Eigen::Index i = 0; i < d.cols(); ++i)
                        dprev(b, argmax(b, i)) += d(b, i);
                break;
            }
            case LayerKind::Relu:
                dprev = (x.array() > 0.0).select(d, 0.0);
                break;
            case LayerKind::Tanh:
                dprev = d.array() * (1.0 - y.array().square());
                break;
            case LayerKind::Flatten:
                dprev = d;
                break;
            case LayerKind::Softmax: {
                dprev.resize(d.rows(), d.cols());
                for (Eigen::Index r = 0; r < d.rows(); ++r) {
                    double dot = d.row(r).dot(y.row(r));
                    dprev.row(r) = (d.row(r).array() - dot) * y.row(r).array();
                }
                break;
            }
        }
        d = std::move(dprev);
    }
    if (dinput) *dinput = std::move(d);
    return g;
}

AdamState make_adam(const Network& net, double lr) {
    if (lr <= 0.0) throw ContractError("adam: learning rate must be positive");
    AdamState st;
    st.lr = lr;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        st.m_w.push_back(Mat::Zero(net.weights[l].rows(), net.weights[l].cols()));
        st.v_w.push_back(Mat::Zero(net.weights[l].rows(), net.weights[l].cols()));
        st.m_b.push_back(Vec::Zero(net.biases[l].size()));
        st.v_b.push_back(Vec::Zero(net.biases[l].size()));
    }
    return st;
}

void adam_step(Network& net, const Gradients& g, AdamState& st) {
    for (std::size_t l = 0; l < net.layers.size(); ++l)
        if (!g.w[l].allFinite() || !g.b[l].allFinite())
            throw NumericError("adam: non-finite gradient at layer " + std::to_string(l));

    st.t += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        if (net.weights[l].size() == 0) continue;
        st.m_w[l] = st.beta1 * st.m_w[l] + (1.0 - st.beta1) * g.w[l];
        st.v_w[l] = st.beta2 * st.v_w[l].array() + (1.0 - st.beta2) * g.w[l].array().square();
        net.weights[l].array() -=
            st.lr * (st.m_w[l].array() / bc1) / ((st.v_w[l].array() / bc2).sqrt() + st.eps);
        st.m_b[l] = st.beta1 * st.m_b[l] + (1.0 - st.beta1) * g.b[l];
        st.v_b[l] = st.beta2 * st.v_b[l].array() + (1.0 - st.beta2) * g.b[l].array().square();
        net.biases[l].array() -=
            st.lr * (st.m_b[l].array() / bc1) / ((st.v_b[l].array() / bc2).sqrt() + st.eps);
    }
}

double softmax_xent(const Mat& logits, const std::vector<int>& labels, Mat* dlogits) {
    if (static_cast<Eigen::Index>(labels.size()) != logits.rows())
        throw ContractError("softmax_xent: label count does not match batch");
    Mat p = softmax_rows(logits);
    const double floor = 1e-12;
    double loss = 0.0;
    for (Eigen::Index r = 0; r < p.rows(); ++r)
        loss -= std::log(std::max(p(r, labels[r]), floor));
    loss /= static_cast<double>(p.rows());
    if (dlogits) {
        *dlogits = p;
        for (Eigen::Index r = 0; r < p.rows(); ++r) (*dlogits)(r, labels[r]) -= 1.0;
        *dlogits /= static_cast<double>(p.rows());
    }
    return loss;
}

double grad_check(const Network& net0, GradCheckLoss loss_kind, std::uint64_t seed, double eps) {
    if (net0.param_count() >= 5000)
        throw ContractError("grad_check: network too large (< 5000 params required)");
    if (loss_kind == GradCheckLoss::SoftmaxXent &&
        net0.layers.back().kind != LayerKind::Softmax)
        throw ContractError("grad_check: SoftmaxXent requires a trailing Softmax layer");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int B = 2;
    Mat input(B, net0.input_shape.flat());

    // Redraw inputs until relu/pool kinks and pool ties are comfortably avoided.
    Network net = net0;
    Tape tape;
    for (int attempt = 0;; ++attempt) {
        for (Eigen::Index i = 0; i < input.size(); ++i) input.data()[i] = u(rng);
        forward(net, input, &tape);
        bool clean = true;
        for (std::size_t l = 0; l < net.layers.size() && clean; ++l) {
            if (net.layers[l].kind == LayerKind::Relu &&
                tape.acts[l].array().abs().minCoeff() < 1e-3)
                clean = false;
        }
        if (clean || attempt >= 20) break;
    }

    Mat cmat;
    std::vector<int> labels;
    if (loss_kind == GradCheckLoss::WeightedSum) {
        cmat.resize(B, net.output_shape().flat());
        for (Eigen::Index i = 0; i < cmat.size(); ++i) cmat.data()[i] = u(rng);
    } else {
        std::uniform_int_distribution<int> lab(0, net.output_shape().flat() - 1);
        for (int b = 0; b < B; ++b) labels.push_back(lab(rng));
    }

    auto loss_of = [&](const Network& n) {
        Mat out = forward(n, input);
        if (loss_kind == GradCheckLoss::WeightedSum) return (cmat.array() * out.array()).sum();
        double loss = 0.0;
        for (int b = 0; b < B; ++b) loss -= std::log(std::max(out(b, labels[b]), 1e-12));
        return loss / B;
    };

    // Analytic gradients.
    forward(net, input, &tape);
    Gradients g;
    if (loss_kind == GradCheckLoss::WeightedSum) {
        g = backward(net, tape, cmat);
    } else {
        const int logits_layer = static_cast<int>(net.layers.size()) - 2;
        Mat dlogits;
        softmax_xent(tape.acts[net.layers.size() - 1], labels, &dlogits);
        g = backward(net, tape, dlogits, nullptr, logits_layer);
    }

    double max_rel = 0.0;
    auto probe = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + eps;
        double lp = loss_of(net);
        param = saved - eps;
        double lm = loss_of(net);
        param = saved;
        double numeric = (lp - lm) / (2.0 * eps);
        double rel = std::abs(analytic - numeric) /
                     std::max(1e-8, std::abs(analytic) + std::abs(numeric));
        max_rel = std::max(max_rel, rel);
    };
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        for (Eigen::Index i = 0; i < net.weights[l].size(); ++i)
            probe(net.weights[l].data()[i], g.w[l].data()[i]);
        for (Eigen::Index i = 0; i < net.biases[l].size(); ++i)
            probe(net.biases[l].data()[i], g.b[l].data()[i]);
    }
    return max_rel;
}

namespace {

constexpr char kMagic[4] = {'R', 'W', 'N', 'N'};
constexpr std::uint16_t kVersion = 1;

// Per-kind dimension list lengths; Dense:[in,out], Conv2d:[in_ch,out_ch,in_h,in_w],
// MaxPool2d/Flatten:[c,h,w], Relu/Tanh/Softmax:[flat_dim].
int dim_count(LayerKind k) {
    switch (k) {
        case LayerKind::Dense: return 2;
        case LayerKind::Conv2d: return 4;
        case LayerKind::MaxPool2d:
        case LayerKind::Flatten: return 3;
        case LayerKind::Relu:
        case LayerKind::Tanh:
        case LayerKind::Softmax: return 1;
    }
    return 0;
}

}  // namespace

void save_network(std::ostream& os, const Network& net) {
    io::host_endianness_check();
    io::write_magic(os, kMagic);
    io::write_le<std::uint16_t>(os, kVersion);
    io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(net.layers.size()));
    Shape in_shape = net.input_shape;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const LayerSpec& spec = net.layers[l];
        io::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(spec.kind));
        std::vector<std::uint32_t> dims;
        switch (spec.kind) {
            case LayerKind::Dense:
                dims = {static_cast<std::uint32_t>(spec.in), static_cast<std::uint32_t>(spec.out)};
                break;
            case LayerKind::Conv2d:
                dims = {static_cast<std::uint32_t>(spec.in), static_cast<std::uint32_t>(spec.out),
                        static_cast<std::uint32_t>(in_shape.dims[1]),
                        static_cast<std::uint32_t>(in_shape.dims[2])};
                break;
            case LayerKind::MaxPool2d:
            case LayerKind::Flatten:
                dims = {static_cast<std::uint32_t>(in_shape.dims.size() == 3 ? in_shape.dims[0] : 1),
                        static_cast<std::uint32_t>(in_shape.dims.size() == 3 ? in_shape.dims[1] : 1),
                        static_cast<std::uint32_t>(in_shape.dims.size() == 3 ? in_shape.dims[2]
                                                                             : in_shape.flat())};
                break;
            default:
                dims = {static_cast<std::uint32_t>(in_shape.flat())};
        }
        for (std::uint32_t d : dims) io::write_le<std::uint32_t>(os, d);
        io::write_f64_array(os, net.weights[l].data(), static_cast<std::size_t>(net.weights[l].size()));
        io::write_vec(os, net.biases[l]);
        in_shape = net.out_shapes[l];
    }
}

Network load_network(std::istream& is) {
    io::host_endianness_check();
    io::expect_magic(is, kMagic, "network");
    const auto version = io::read_le<std::uint16_t>(is);
    if (version != kVersion)
        throw FormatError("unsupported network format version " + std::to_string(version));
    const auto n_layers = io::read_le<std::uint16_t>(is);
    if (n_layers == 0) throw FormatError("network with zero layers");

    std::vector<LayerSpec> specs;
    std::vector<Mat> weights;
    std::vector<Vec> biases;
    Shape input_shape;
    for (int l = 0; l < n_layers; ++l) {
        const auto kind_tag = io::read_le<std::uint8_t>(is);
        if (kind_tag > static_cast<std::uint8_t>(LayerKind::Softmax))
            throw FormatError("unknown layer kind tag " + std::to_string(kind_tag));
        const LayerKind kind = static_cast<LayerKind>(kind_tag);
        std::vector<std::uint32_t> dims(dim_count(kind));
        for (auto& d : dims) d = io::read_le<std::uint32_t>(is);

        LayerSpec spec{kind, 0, 0};
        Shape layer_in;
        switch (kind) {
            case LayerKind::Dense:
                spec.in = static_cast<int>(dims[0]);
                spec.out = static_cast<int>(dims[1]);
                layer_in = Shape{{spec.in}};
                break;
            case LayerKind::Conv2d:
                spec.in = static_cast<int>(dims[0]);
                spec.out = static_cast<int>(dims[1]);
                layer_in = Shape{{spec.in, static_cast<int>(dims[2]), static_cast<int>(dims[3])}};
                break;
            case LayerKind::MaxPool2d:
            case LayerKind::Flatten:
                layer_in = Shape{{static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                                  static_cast<int>(dims[2])}};
                break;
            default:
                layer_in = Shape{{static_cast<int>(dims[0])}};
        }
        if (l == 0) input_shape = layer_in;
        specs.push_back(spec);

        Mat w;
        Vec b;
        if (kind == LayerKind::Dense)
            w.resize(spec.out, spec.in), b.resize(spec.out);
        else if (kind == LayerKind::Conv2d)
            w.resize(spec.out, spec.in * 9), b.resize(spec.out);
        io::read_f64_array(is, w.data(), static_cast<std::size_t>(w.size()));
        if (b.size() > 0) io::read_vec(is, b);
        weights.push_back(std::move(w));
        biases.push_back(std::move(b));
    }

    Network net = build_network(input_shape, specs, /*seed=*/0);
    net.weights = std::move(weights);
    net.biases = std::move(biases);
    return net;
}

void save_network_file(const std::string& path, const Network& net) {
    auto os = io::open_out(path);
    save_network(os, net);
}

Network load_network_file(const std::string& path) {
    auto is = io::open_in(path);
    return load_network(is);
}

}  // namespace rw::nn
