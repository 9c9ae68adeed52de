#include "dynadps/conditional.hpp"

#include "dynadps/filters.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>

namespace dynadps {

Image bilinear_upsample(const Image& y, int k) {
    if (k < 1) throw std::invalid_argument("bilinear_upsample: factor must be >= 1");
    if (y.size() == 0) throw std::invalid_argument("bilinear_upsample: empty input");
    if (k == 1) return y;
    const int rows = static_cast<int>(y.rows());
    const int cols = static_cast<int>(y.cols());
    Image out(rows * k, cols * k);
    for (int i = 0; i < rows * k; ++i) {
        const double si = std::clamp((i + 0.5) / k - 0.5, 0.0, rows - 1.0);
        const int i0 = static_cast<int>(si);
        const int i1 = std::min(i0 + 1, rows - 1);
        const double wi = si - i0;
        for (int j = 0; j < cols * k; ++j) {
            const double sj = std::clamp((j + 0.5) / k - 0.5, 0.0, cols - 1.0);
            const int j0 = static_cast<int>(sj);
            const int j1 = std::min(j0 + 1, cols - 1);
            const double wj = sj - j0;
            out(i, j) = (1.0 - wi) * ((1.0 - wj) * y(i0, j0) + wj * y(i0, j1)) +
                        wi * ((1.0 - wj) * y(i1, j0) + wj * y(i1, j1));
        }
    }
    return out;
}

Image naive_predict(const Image& y, const DegradationConfig& cfg_assumed) {
    cfg_assumed.validate();
    const Image up = bilinear_upsample(y, cfg_assumed.factor_k);
    return gamma_transform(up, 1.0 / cfg_assumed.gamma, cfg_assumed.gamma_floor);
}

void RidgeModel::validate() const {
    if (patch_in < 1 || patch_in % 2 == 0)
        throw std::invalid_argument("RidgeModel: patch_in must be odd and positive");
    if (scale_k < 1) throw std::invalid_argument("RidgeModel: scale_k must be >= 1");
    if (!(ridge_lambda > 0.0))
        throw std::invalid_argument("RidgeModel: ridge_lambda must be positive");
    if (weights.rows() != patch_in * patch_in + 1 || weights.cols() != scale_k * scale_k)
        throw std::invalid_argument("RidgeModel: weight dims do not match patch/scale");
}

namespace {

// Flattened reflective patch around (i, j), bias appended last.
void extract_patch(const Image& y, int i, int j, int patch_in, Eigen::VectorXd& phi) {
    const int half = patch_in / 2;
    const int rows = static_cast<int>(y.rows());
    const int cols = static_cast<int>(y.cols());
    int idx = 0;
    for (int di = -half; di <= half; ++di) {
        const int si = reflect_index(i + di, rows);
        for (int dj = -half; dj <= half; ++dj)
            phi(idx++) = y(si, reflect_index(j + dj, cols));
    }
    phi(idx) = 1.0;
}

}  // namespace

RidgeModel ridge_fit(const std::vector<std::pair<Image, Image>>& pairs_hf_lf, int patch_in, int k,
                     double ridge_lambda, std::uint64_t seed) {
    (void)seed;  // full deterministic extraction; no subsampling
    if (pairs_hf_lf.empty()) throw std::invalid_argument("ridge_fit: no training pairs");
    if (patch_in < 1 || patch_in % 2 == 0)
        throw std::invalid_argument("ridge_fit: patch_in must be odd and positive");
    if (k < 1) throw std::invalid_argument("ridge_fit: k must be >= 1");
    if (!(ridge_lambda > 0.0)) throw std::invalid_argument("ridge_fit: lambda must be positive");

    const int dim = patch_in * patch_in + 1;
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(dim, k * k);
    Eigen::VectorXd phi(dim);
    Eigen::VectorXd q(k * k);

    for (const auto& [x_hf, y_lf] : pairs_hf_lf) {
        if (x_hf.rows() != y_lf.rows() * k || x_hf.cols() != y_lf.cols() * k)
            throw std::invalid_argument("ridge_fit: HF dims must be k times LF dims");
        const int rows = static_cast<int>(y_lf.rows());
        const int cols = static_cast<int>(y_lf.cols());
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) {
                extract_patch(y_lf, i, j, patch_in, phi);
                int idx = 0;
                for (int bi = 0; bi < k; ++bi)
                    for (int bj = 0; bj < k; ++bj) q(idx++) = x_hf(i * k + bi, j * k + bj);
                gram.noalias() += phi * phi.transpose();
                cross.noalias() += phi * q.transpose();
            }
    }
    gram.diagonal().array() += ridge_lambda;

    RidgeModel model;
    model.patch_in = patch_in;
    model.scale_k = k;
    model.ridge_lambda = ridge_lambda;
    model.weights = gram.ldlt().solve(cross);
    model.validate();
    return model;
}

Image ridge_predict_preclamp(const RidgeModel& model, const Image& y) {
    model.validate();
    if (y.size() == 0) throw std::invalid_argument("ridge_predict: empty input");
    const int rows = static_cast<int>(y.rows());
    const int cols = static_cast<int>(y.cols());
    const int k = model.scale_k;
    Image out(rows * k, cols * k);
    Eigen::VectorXd phi(model.patch_in * model.patch_in + 1);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            extract_patch(y, i, j, model.patch_in, phi);
            const Eigen::VectorXd block = model.weights.transpose() * phi;
            int idx = 0;
            for (int bi = 0; bi < k; ++bi)
                for (int bj = 0; bj < k; ++bj) out(i * k + bi, j * k + bj) = block(idx++);
        }
    return out;
}

Image ridge_predict(const RidgeModel& model, const Image& y) {
    return clamp(ridge_predict_preclamp(model, y), 0.0, 1.2);
}

}  // namespace dynadps
