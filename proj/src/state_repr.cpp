#include "rw/state_repr.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <sstream>

#include "rw/errors.hpp"
#include "rw/io.hpp"

namespace rw::state {

StateSpec StateSpec::pixels(int w, int h) {
    StateSpec s;
    s.variant = Variant::Pixels;
    s.width = w;
    s.height = h;
    return s;
}

StateSpec StateSpec::pca_image(int k, int src_w, int src_h) {
    StateSpec s;
    s.variant = Variant::PcaImage;
    s.k = k;
    s.width = src_w;
    s.height = src_h;
    return s;
}

StateSpec StateSpec::reward_window(int n) {
    StateSpec s;
    s.variant = Variant::RewardWindow;
    s.n = n;
    return s;
}

int StateSpec::dim() const {
    switch (variant) {
        case Variant::Pixels: return width * height;
        case Variant::PcaImage: return k;
        case Variant::RewardWindow: return n;
    }
    return 0;
}

std::string StateSpec::str() const {
    std::ostringstream os;
    switch (variant) {
        case Variant::Pixels: os << "pixels:" << width << "x" << height; break;
        case Variant::PcaImage: os << "pca:" << k; break;
        case Variant::RewardWindow: os << "rewards:" << n; break;
    }
    return os.str();
}

StateSpec parse_state_spec(const std::string& text) {
    auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
    try {
        if (head == "pixels") {
            auto x = arg.find('x');
            if (x == std::string::npos) throw UsageError("");
            return StateSpec::pixels(std::stoi(arg.substr(0, x)), std::stoi(arg.substr(x + 1)));
        }
        if (head == "pca") return StateSpec::pca_image(arg.empty() ? 50 : std::stoi(arg), 32, 24);
        if (head == "rewards")
            return StateSpec::reward_window(arg.empty() ? 15 : std::stoi(arg));
    } catch (const std::exception&) {
        // fall through to the UsageError below
    }
    throw UsageError("bad state spec '" + text +
                     "' (expected pixels:WxH, pca:K, or rewards:N)");
}

PcaBasis fit_pca(const MatrixXd& samples, int k) {
    const Eigen::Index m = samples.rows();
    const Eigen::Index d = samples.cols();
    if (k < 1) throw ContractError("fit_pca: k must be >= 1");
    if (k > std::min<Eigen::Index>(m - 1, d))
        throw ContractError("fit_pca: k exceeds min(samples-1, dim)");

    PcaBasis basis;
    basis.mean = samples.colwise().mean();
    MatrixXd centered = samples.rowwise() - basis.mean.transpose();

    MatrixXd comps(k, d);
    VectorXd eigvals(k);
    if (m < d) {
        // Gram trick: eigendecompose the m x m sample Gram matrix and map
        // eigenvectors back to pixel space.
        MatrixXd gram = centered * centered.transpose() / static_cast<double>(m - 1);
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram);
        // Eigen returns ascending eigenvalues; take the top k from the back.
        for (int i = 0; i < k; ++i) {
            const Eigen::Index j = m - 1 - i;
            eigvals[i] = std::max(0.0, es.eigenvalues()[j]);
            VectorXd v = centered.transpose() * es.eigenvectors().col(j);
            comps.row(i) = v.normalized().transpose();
        }
    } else {
        MatrixXd cov = centered.transpose() * centered / static_cast<double>(m - 1);
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov);
        for (int i = 0; i < k; ++i) {
            const Eigen::Index j = d - 1 - i;
            eigvals[i] = std::max(0.0, es.eigenvalues()[j]);
            comps.row(i) = es.eigenvectors().col(j).transpose();
        }
    }
    // Sign convention: largest-magnitude entry positive.
    for (int i = 0; i < k; ++i) {
        Eigen::Index arg;
        comps.row(i).cwiseAbs().maxCoeff(&arg);
        if (comps(i, arg) < 0.0) comps.row(i) = -comps.row(i);
    }
    basis.components = std::move(comps);
    basis.explained = std::move(eigvals);
    return basis;
}

VectorXd pca_project(const PcaBasis& basis, const VectorXd& flat) {
    if (flat.size() != basis.mean.size())
        throw ContractError("pca_project: dimension mismatch");
    return basis.components * (flat - basis.mean);
}

VectorXd pca_project(const PcaBasis& basis, const Image& img) {
    return pca_project(basis, img.pixels);
}

VectorXd pca_reconstruct(const PcaBasis& basis, const VectorXd& coords) {
    if (coords.size() != basis.components.rows())
        throw ContractError("pca_reconstruct: coordinate dimension mismatch");
    return basis.mean + basis.components.transpose() * coords;
}

Image downsample(const Image& img, int target_w, int target_h) {
    if (target_w < 1 || target_h < 1 || img.width % target_w != 0 || img.height % target_h != 0)
        throw ContractError("downsample: target must divide source dimensions evenly");
    const int fx = img.width / target_w;
    const int fy = img.height / target_h;
    Image out(target_w, target_h);
    for (int y = 0; y < target_h; ++y)
        for (int x = 0; x < target_w; ++x) {
            double sum = 0.0;
            for (int dy = 0; dy < fy; ++dy)
                for (int dx = 0; dx < fx; ++dx) sum += img.at(x * fx + dx, y * fy + dy);
            out.at(x, y) = sum / (fx * fy);
        }
    return out;
}

RewardWindowBuffer::RewardWindowBuffer(int n) {
    if (n < 1) throw ContractError("reward window: n must be >= 1");
    window_ = VectorXd::Zero(n);
}

VectorXd RewardWindowBuffer::push_and_encode(double reward) {
    if (!(reward >= 0.0 && reward <= 1.0))
        throw ContractError("reward window: reward outside [0,1] violates the classifier contract");
    const Eigen::Index n = window_.size();
    if (n > 1) window_.head(n - 1) = window_.tail(n - 1).eval();
    window_[n - 1] = reward;
    return window_;
}

void RewardWindowBuffer::reset() { window_.setZero(); }

VectorXd encode(const StateSpec& spec, const Image& observation,
                const RewardWindowBuffer* window, const PcaBasis* basis) {
    switch (spec.variant) {
        case Variant::Pixels:
            require_same_resolution(observation, spec.width, spec.height, "encode(pixels)");
            return observation.pixels;
        case Variant::PcaImage: {
            if (!basis) throw ContractError("encode(pca): no basis provided");
            const Image* img = &observation;
            Image scratch;
            if (observation.size() != basis->dim()) {
                scratch = downsample(observation, spec.width, spec.height);
                img = &scratch;
            }
            return pca_project(*basis, *img);
        }
        case Variant::RewardWindow:
            if (!window) throw ContractError("encode(rewards): no window provided");
            if (window->capacity() != spec.n)
                throw ContractError("encode(rewards): window capacity does not match spec");
            return window->encoded();
    }
    throw ContractError("encode: unknown state spec variant");
}

namespace {
constexpr char kMagic[4] = {'R', 'W', 'P', 'C'};
constexpr std::uint16_t kVersion = 1;
}  // namespace

void save_pca(const std::string& path, const PcaBasis& basis) {
    auto os = io::open_out(path);
    io::write_magic(os, kMagic);
    io::write_le<std::uint16_t>(os, kVersion);
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(basis.dim()));
    io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(basis.k()));
    io::write_vec(os, basis.mean);
    io::write_f64_array(os, basis.components.data(),
                        static_cast<std::size_t>(basis.components.size()));
    io::write_vec(os, basis.explained);
}

PcaBasis load_pca(const std::string& path) {
    auto is = io::open_in(path);
    io::expect_magic(is, kMagic, "pca basis");
    const auto version = io::read_le<std::uint16_t>(is);
    if (version != kVersion)
        throw FormatError("unsupported pca version " + std::to_string(version));
    const auto dim = io::read_le<std::uint32_t>(is);
    const auto k = io::read_le<std::uint16_t>(is);
    PcaBasis basis;
    basis.mean.resize(dim);
    io::read_vec(is, basis.mean);
    basis.components.resize(k, dim);
    io::read_f64_array(is, basis.components.data(),
                       static_cast<std::size_t>(basis.components.size()));
    basis.explained.resize(k);
    io::read_vec(is, basis.explained);
    if (is.peek() != EOF) throw FormatError("pca basis: trailing bytes");
    return basis;
}

}  // namespace rw::state
