#pragma once

// Convolutional autoencoder used for shape anomaly scoring.
//
// Architecture (C = channel width, every convolution 5x5):
//
//   encoder  conv same 100 -> pool 50 -> conv same -> pool 25 -> conv same
//            -> pool 13 -> conv same -> pool 7 -> conv same
//   decoder  up 14 -> conv valid 10 -> up 20 -> conv valid 16
//            -> up 32 -> conv valid 28 -> up 56
//            -> dense 500 -> dense 10000 (reshaped to 100x100)
//
// Max-pooling rounds odd sizes up (25 -> 13 -> 7). The decoder reaches the
// labeled 10/16/28 sizes with valid (unpadded) convolutions after each 2x
// up-sampling. Hidden layers use ReLU, the output layer a sigmoid.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "error.hpp"
#include "image.hpp"
#include "ingestion.hpp"
#include "scores.hpp"
#include "shape.hpp"

namespace anomet {

static_assert(std::endian::native == std::endian::little, "model serialization assumes a little-endian host");

namespace nn {

using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

/// splitmix64: portable, seedable generator so initial weights and sample
/// order do not depend on the standard library's distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * double(n)); }

private:
    std::uint64_t state_;
};

struct Param {
    std::string name;
    Matrix value, grad, m, v;

    Param(std::string n, Eigen::Index rows, Eigen::Index cols)
        : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)),
          m(Matrix::Zero(rows, cols)), v(Matrix::Zero(rows, cols)) {}
};

enum class Activation { none, relu, sigmoid };

/// A layer maps a (features x batch) matrix to another. Samples are stored
/// channel-major: feature index = c * H * W + y * W + x.
class Layer {
public:
    virtual ~Layer() = default;
    virtual Eigen::Index in_features() const = 0;
    virtual Eigen::Index out_features() const = 0;
    virtual void forward(const Matrix& x, Matrix& y) = 0;
    /// Accumulates parameter gradients; writes dx when `dx` is non-null.
    virtual void backward(const Matrix& x, const Matrix& dy, Matrix* dx) = 0;
    virtual std::vector<Param*> params() { return {}; }
    virtual std::string describe() const = 0;
};

class Conv2d final : public Layer {
public:
    Conv2d(std::string name, int cin, int cout, int in_size, bool same_padding)
        : cin_(cin), cout_(cout), in_(in_size), pad_(same_padding ? 2 : 0), out_(in_size + 2 * pad_ - 4),
          weight_(name + ".weight", cin * 25, cout), bias_(name + ".bias", 1, cout) {
        if (out_ < 1) throw InvalidInput("conv output would be empty");
    }

    Eigen::Index in_features() const override { return Eigen::Index(cin_) * in_ * in_; }
    Eigen::Index out_features() const override { return Eigen::Index(cout_) * out_ * out_; }
    int out_size() const { return out_; }

    void forward(const Matrix& x, Matrix& y) override {
        y.resize(out_features(), x.cols());
        for (Eigen::Index b = 0; b < x.cols(); ++b) {
            im2col(x.col(b).data());
            MatrixMap out(y.col(b).data(), Eigen::Index(out_) * out_, cout_);
            out.noalias() = col_ * weight_.value;
            out.rowwise() += bias_.value.row(0);
        }
    }

    void backward(const Matrix& x, const Matrix& dy, Matrix* dx) override {
        if (dx) dx->setZero(in_features(), x.cols());
        for (Eigen::Index b = 0; b < x.cols(); ++b) {
            im2col(x.col(b).data());
            ConstMatrixMap g(dy.col(b).data(), Eigen::Index(out_) * out_, cout_);
            weight_.grad.noalias() += col_.transpose() * g;
            bias_.grad += g.colwise().sum();
            if (dx) {
                dcol_.noalias() = g * weight_.value.transpose();
                col2im(dx->col(b).data());
            }
        }
    }

    std::vector<Param*> params() override { return {&weight_, &bias_}; }

    std::string describe() const override {
        std::ostringstream os;
        os << "conv5x5 " << cin_ << "->" << cout_ << " " << in_ << "->" << out_ << (pad_ ? " same" : " valid");
        return os.str();
    }

private:
    void im2col(const float* src) {
        const Eigen::Index hw = Eigen::Index(out_) * out_;
        col_.resize(hw, Eigen::Index(cin_) * 25);
        for (int c = 0; c < cin_; ++c)
            for (int ky = 0; ky < 5; ++ky)
                for (int kx = 0; kx < 5; ++kx) {
                    float* dst = col_.col((c * 5 + ky) * 5 + kx).data();
                    const float* plane = src + std::size_t(c) * in_ * in_;
                    for (int oy = 0; oy < out_; ++oy) {
                        const int iy = oy + ky - pad_;
                        float* row = dst + std::size_t(oy) * out_;
                        if (iy < 0 || iy >= in_) {
                            std::fill(row, row + out_, 0.0f);
                            continue;
                        }
                        for (int ox = 0; ox < out_; ++ox) {
                            const int ix = ox + kx - pad_;
                            row[ox] = (ix < 0 || ix >= in_) ? 0.0f : plane[iy * in_ + ix];
                        }
                    }
                }
    }

    void col2im(float* dst) const {
        for (int c = 0; c < cin_; ++c)
            for (int ky = 0; ky < 5; ++ky)
                for (int kx = 0; kx < 5; ++kx) {
                    const float* src = dcol_.col((c * 5 + ky) * 5 + kx).data();
                    float* plane = dst + std::size_t(c) * in_ * in_;
                    for (int oy = 0; oy < out_; ++oy) {
                        const int iy = oy + ky - pad_;
                        if (iy < 0 || iy >= in_) continue;
                        const float* row = src + std::size_t(oy) * out_;
                        for (int ox = 0; ox < out_; ++ox) {
                            const int ix = ox + kx - pad_;
                            if (ix >= 0 && ix < in_) plane[iy * in_ + ix] += row[ox];
                        }
                    }
                }
    }

    int cin_, cout_, in_, pad_, out_;
    Param weight_, bias_;
    Matrix col_, dcol_;
};

/// 2x2 max-pooling, stride 2, odd sizes rounded up.
class MaxPool2 final : public Layer {
public:
    MaxPool2(int channels, int in_size) : c_(channels), in_(in_size), out_((in_size + 1) / 2) {}

    Eigen::Index in_features() const override { return Eigen::Index(c_) * in_ * in_; }
    Eigen::Index out_features() const override { return Eigen::Index(c_) * out_ * out_; }
    int out_size() const { return out_; }

    void forward(const Matrix& x, Matrix& y) override {
        y.resize(out_features(), x.cols());
        argmax_.resize(std::size_t(out_features()) * x.cols());
        for (Eigen::Index b = 0; b < x.cols(); ++b) {
            const float* src = x.col(b).data();
            float* dst = y.col(b).data();
            std::int32_t* arg = argmax_.data() + std::size_t(b) * out_features();
            for (int c = 0; c < c_; ++c)
                for (int oy = 0; oy < out_; ++oy)
                    for (int ox = 0; ox < out_; ++ox) {
                        std::int32_t best = -1;
                        float bv = 0.0f;
                        for (int dy = 0; dy < 2; ++dy)
                            for (int dx = 0; dx < 2; ++dx) {
                                const int iy = 2 * oy + dy, ix = 2 * ox + dx;
                                if (iy >= in_ || ix >= in_) continue;
                                const std::int32_t idx = (c * in_ + iy) * in_ + ix;
                                if (best < 0 || src[idx] > bv) {
                                    best = idx;
                                    bv = src[idx];
                                }
                            }
                        const int o = (c * out_ + oy) * out_ + ox;
                        dst[o] = bv;
                        arg[o] = best;
                    }
        }
    }

    void backward(const Matrix& x, const Matrix& dy, Matrix* dx) override {
        if (!dx) return;
        dx->setZero(in_features(), x.cols());
        for (Eigen::Index b = 0; b < x.cols(); ++b) {
            const std::int32_t* arg = argmax_.data() + std::size_t(b) * out_features();
            for (Eigen::Index o = 0; o < out_features(); ++o) (*dx)(arg[o], b) += dy(o, b);
        }
    }

    std::string describe() const override {
        return "maxpool2 " + std::to_string(in_) + "->" + std::to_string(out_);
    }

private:
    int c_, in_, out_;
    std::vector<std::int32_t> argmax_;
};

/// Nearest-neighbour 2x up-sampling.
class Upsample2 final : public Layer {
public:
    Upsample2(int channels, int in_size) : c_(channels), in_(in_size), out_(2 * in_size) {}

    Eigen::Index in_features() const override { return Eigen::Index(c_) * in_ * in_; }
    Eigen::Index out_features() const override { return Eigen::Index(c_) * out_ * out_; }
    int out_size() const { return out_; }

    void forward(const Matrix& x, Matrix& y) override {
        y.resize(out_features(), x.cols());
        for (Eigen::Index b = 0; b < x.cols(); ++b)
            for (int c = 0; c < c_; ++c)
                for (int oy = 0; oy < out_; ++oy)
                    for (int ox = 0; ox < out_; ++ox)
                        y((c * out_ + oy) * out_ + ox, b) = x((c * in_ + oy / 2) * in_ + ox / 2, b);
    }

    void backward(const Matrix& x, const Matrix& dy, Matrix* dx) override {
        if (!dx) return;
        dx->setZero(in_features(), x.cols());
        for (Eigen::Index b = 0; b < x.cols(); ++b)
            for (int c = 0; c < c_; ++c)
                for (int oy = 0; oy < out_; ++oy)
                    for (int ox = 0; ox < out_; ++ox)
                        (*dx)((c * in_ + oy / 2) * in_ + ox / 2, b) += dy((c * out_ + oy) * out_ + ox, b);
    }

    std::string describe() const override {
        return "upsample2 " + std::to_string(in_) + "->" + std::to_string(out_);
    }

private:
    int c_, in_, out_;
};

class Dense final : public Layer {
public:
    Dense(std::string name, Eigen::Index in, Eigen::Index out)
        : in_(in), out_(out), weight_(name + ".weight", out, in), bias_(name + ".bias", out, 1) {}

    Eigen::Index in_features() const override { return in_; }
    Eigen::Index out_features() const override { return out_; }

    void forward(const Matrix& x, Matrix& y) override {
        y.noalias() = weight_.value * x;
        y.colwise() += bias_.value.col(0);
    }

    void backward(const Matrix& x, const Matrix& dy, Matrix* dx) override {
        weight_.grad.noalias() += dy * x.transpose();
        bias_.grad += dy.rowwise().sum();
        if (dx) dx->noalias() = weight_.value.transpose() * dy;
    }

    std::vector<Param*> params() override { return {&weight_, &bias_}; }

    std::string describe() const override {
        return "dense " + std::to_string(in_) + "->" + std::to_string(out_);
    }

private:
    Eigen::Index in_, out_;
    Param weight_, bias_;
};

} // namespace nn

/// Trained shape autoencoder: 100x100 single-channel input and output in [0,1].
class ShapeModel {
public:
    static constexpr std::uint32_t kFormatVersion = 1;
    static constexpr char kMagic[8] = {'A', 'N', 'O', 'M', 'E', 'T', 'A', 'E'};
    static constexpr int kImageSize = 100;

    explicit ShapeModel(int channel_width = 16) : width_(channel_width) { build(); }

    ShapeModel(ShapeModel&&) noexcept = default;
    ShapeModel& operator=(ShapeModel&&) noexcept = default;

    int channel_width() const { return width_; }

    /// Human-readable architecture descriptor, stored alongside the weights.
    std::string descriptor() const {
        std::ostringstream os;
        os << "anomet shape autoencoder\n";
        os << "channel_width " << width_ << "\n";
        for (std::size_t i = 0; i < stages_.size(); ++i) {
            os << "stage " << i << ' ' << stages_[i].layer->describe();
            switch (stages_[i].act) {
                case nn::Activation::relu: os << " relu"; break;
                case nn::Activation::sigmoid: os << " sigmoid"; break;
                case nn::Activation::none: break;
            }
            os << '\n';
        }
        os << "note pooling rounds up: 25->13, 13->7\n";
        os << "note decoder convolutions are unpadded: 14->10, 20->16, 32->28\n";
        os << "note final up-sampling 28->56 feeds the 500-wide dense layer\n";
        return os.str();
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (auto* p : params_) n += std::size_t(p->value.size());
        return n;
    }

    /// Forward pass on a (10000 x batch) matrix of images; returns (10000 x batch).
    nn::Matrix forward(const nn::Matrix& input) {
        run_forward(input);
        return acts_.back();
    }

    FloatImage reconstruct(const BinaryImage& image) {
        check_size(image);
        nn::Matrix x(kImageSize * kImageSize, 1);
        for (std::size_t i = 0; i < image.size(); ++i) x(Eigen::Index(i), 0) = image.pixels[i] ? 1.0f : 0.0f;
        const nn::Matrix& y = forward(x);
        FloatImage out(kImageSize, kImageSize);
        for (std::size_t i = 0; i < out.size(); ++i) out.pixels[i] = y(Eigen::Index(i), 0);
        return out;
    }

    std::vector<FloatImage> reconstruct(std::span<const BinaryImage> images, int batch = 16) {
        std::vector<FloatImage> out;
        out.reserve(images.size());
        for (std::size_t start = 0; start < images.size(); start += std::size_t(batch)) {
            const std::size_t end = std::min(images.size(), start + std::size_t(batch));
            nn::Matrix x(kImageSize * kImageSize, Eigen::Index(end - start));
            for (std::size_t s = start; s < end; ++s) {
                check_size(images[s]);
                for (std::size_t i = 0; i < images[s].size(); ++i)
                    x(Eigen::Index(i), Eigen::Index(s - start)) = images[s].pixels[i] ? 1.0f : 0.0f;
            }
            const nn::Matrix& y = forward(x);
            for (Eigen::Index b = 0; b < y.cols(); ++b) {
                FloatImage img(kImageSize, kImageSize);
                for (std::size_t i = 0; i < img.size(); ++i) img.pixels[i] = y(Eigen::Index(i), b);
                out.push_back(std::move(img));
            }
        }
        return out;
    }

    /// One optimisation step on a batch (Adam, mean squared error). Returns
    /// the batch loss before the update.
    double train_step(const nn::Matrix& input, const nn::Matrix& target, double lr) {
        run_forward(input);
        const nn::Matrix& y = acts_.back();
        const double n = double(y.size());
        const double loss = double((y - target).squaredNorm()) / n;
        if (!std::isfinite(loss)) return loss;

        for (auto* p : params_) p->grad.setZero();
        nn::Matrix grad = (y - target) * float(2.0 / n);
        nn::Matrix dx;
        for (std::size_t s = stages_.size(); s-- > 0;) {
            apply_activation_grad(stages_[s].act, acts_[s + 1], grad);
            nn::Matrix* dxp = s > 0 ? &dx : nullptr;
            stages_[s].layer->backward(acts_[s], grad, dxp);
            if (dxp) grad.swap(dx);
        }

        ++step_;
        constexpr float b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
        const float c1 = float(1.0 - std::pow(double(b1), double(step_)));
        const float c2 = float(1.0 - std::pow(double(b2), double(step_)));
        const float rate = float(lr);
        for (auto* p : params_) {
            p->m.array() = b1 * p->m.array() + (1.0f - b1) * p->grad.array();
            p->v.array() = b2 * p->v.array() + (1.0f - b2) * p->grad.array().square();
            p->value.array() -= rate * (p->m.array() / c1) / ((p->v.array() / c2).sqrt() + eps);
        }
        return loss;
    }

    void save(const std::string& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw InvalidInput("cannot open model for writing: " + path);
        os.write(kMagic, sizeof kMagic);
        write_u32(os, kFormatVersion);
        const std::string desc = descriptor();
        write_u32(os, std::uint32_t(desc.size()));
        os.write(desc.data(), std::streamsize(desc.size()));
        write_u32(os, std::uint32_t(params_.size()));
        for (const auto* p : params_) {
            write_u32(os, std::uint32_t(p->name.size()));
            os.write(p->name.data(), std::streamsize(p->name.size()));
            write_u32(os, std::uint32_t(p->value.rows()));
            write_u32(os, std::uint32_t(p->value.cols()));
            os.write(reinterpret_cast<const char*>(p->value.data()), std::streamsize(p->value.size() * sizeof(float)));
        }
        if (!os) throw InvalidInput("model write failed: " + path);
    }

    static ShapeModel load(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw DecodeError("cannot open model: " + path);
        char magic[8];
        if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
            throw MalformedRecord("not a shape model file: " + path);
        const std::uint32_t version = read_u32(is);
        if (version != kFormatVersion)
            throw VersionMismatch("shape model: unsupported version " + std::to_string(version));
        std::string desc(read_u32(is, 1u << 20), '\0');
        if (!is.read(desc.data(), std::streamsize(desc.size()))) throw MalformedRecord("shape model: truncated descriptor");

        int width = 0;
        {
            std::istringstream ds(desc);
            std::string line;
            while (std::getline(ds, line))
                if (line.rfind("channel_width ", 0) == 0) width = std::stoi(line.substr(14));
        }
        if (width < 1) throw MalformedRecord("shape model: descriptor lacks a channel width");
        ShapeModel model(width);
        if (model.descriptor() != desc) throw MalformedRecord("shape model: architecture descriptor mismatch");

        const std::uint32_t count = read_u32(is);
        if (count != model.params_.size()) throw MalformedRecord("shape model: unexpected tensor count");
        for (auto* p : model.params_) {
            std::string name(read_u32(is, 256), '\0');
            is.read(name.data(), std::streamsize(name.size()));
            const std::uint32_t rows = read_u32(is), cols = read_u32(is);
            if (!is || name != p->name || rows != p->value.rows() || cols != p->value.cols())
                throw MalformedRecord("shape model: tensor '" + name + "' does not match the architecture");
            if (!is.read(reinterpret_cast<char*>(p->value.data()), std::streamsize(p->value.size() * sizeof(float))))
                throw MalformedRecord("shape model: truncated tensor '" + name + "'");
        }
        return model;
    }

    /// Deterministic initialisation (He-uniform for ReLU stages, Glorot for
    /// the sigmoid output).
    void initialize(std::uint64_t seed) {
        nn::Rng rng(seed);
        for (auto& st : stages_) {
            auto ps = st.layer->params();
            if (ps.empty()) continue;
            nn::Param* w = ps[0];
            const double fan_in = double(dynamic_cast<nn::Dense*>(st.layer.get()) ? w->value.cols() : w->value.rows());
            const double fan_out = double(dynamic_cast<nn::Dense*>(st.layer.get()) ? w->value.rows() : w->value.cols());
            const double limit = st.act == nn::Activation::sigmoid ? std::sqrt(6.0 / (fan_in + fan_out))
                                                                    : std::sqrt(6.0 / fan_in);
            for (Eigen::Index i = 0; i < w->value.size(); ++i)
                w->value.data()[i] = float((2.0 * rng.uniform() - 1.0) * limit);
            for (std::size_t k = 1; k < ps.size(); ++k) ps[k]->value.setZero();
        }
        for (auto* p : params_) {
            p->m.setZero();
            p->v.setZero();
        }
        step_ = 0;
    }

private:
    struct Stage {
        std::unique_ptr<nn::Layer> layer;
        nn::Activation act;
    };

    void build() {
        if (width_ < 1) throw InvalidInput("channel width must be positive");
        const int c = width_;
        int size = kImageSize;
        auto conv = [&](const std::string& name, int cin, bool same) {
            auto l = std::make_unique<nn::Conv2d>(name, cin, c, size, same);
            size = l->out_size();
            stages_.push_back({std::move(l), nn::Activation::relu});
        };
        auto pool = [&] {
            auto l = std::make_unique<nn::MaxPool2>(c, size);
            size = l->out_size();
            stages_.push_back({std::move(l), nn::Activation::none});
        };
        auto up = [&] {
            auto l = std::make_unique<nn::Upsample2>(c, size);
            size = l->out_size();
            stages_.push_back({std::move(l), nn::Activation::none});
        };
        conv("enc1", 1, true);
        pool();
        conv("enc2", c, true);
        pool();
        conv("enc3", c, true);
        pool();
        conv("enc4", c, true);
        pool();
        conv("enc5", c, true);
        up();
        conv("dec1", c, false);
        up();
        conv("dec2", c, false);
        up();
        conv("dec3", c, false);
        up();
        const Eigen::Index flat = Eigen::Index(c) * size * size;
        stages_.push_back({std::make_unique<nn::Dense>("fc1", flat, 500), nn::Activation::relu});
        stages_.push_back({std::make_unique<nn::Dense>("fc2", 500, kImageSize * kImageSize), nn::Activation::sigmoid});

        for (auto& st : stages_)
            for (auto* p : st.layer->params()) params_.push_back(p);
        acts_.resize(stages_.size() + 1);
    }

    void run_forward(const nn::Matrix& input) {
        if (input.rows() != kImageSize * kImageSize) throw InvalidInput("shape model input must be 100x100");
        acts_[0] = input;
        for (std::size_t s = 0; s < stages_.size(); ++s) {
            stages_[s].layer->forward(acts_[s], acts_[s + 1]);
            auto& y = acts_[s + 1];
            switch (stages_[s].act) {
                case nn::Activation::relu: y = y.cwiseMax(0.0f); break;
                case nn::Activation::sigmoid: y = (1.0f + (-y.array()).exp()).inverse().matrix(); break;
                case nn::Activation::none: break;
            }
        }
    }

    static void apply_activation_grad(nn::Activation act, const nn::Matrix& y, nn::Matrix& grad) {
        switch (act) {
            case nn::Activation::relu: grad = (y.array() > 0.0f).select(grad, 0.0f); break;
            case nn::Activation::sigmoid: grad.array() *= y.array() * (1.0f - y.array()); break;
            case nn::Activation::none: break;
        }
    }

    static void check_size(const BinaryImage& img) {
        if (img.width != kImageSize || img.height != kImageSize)
            throw InvalidInput("shape image must be 100x100, got " + std::to_string(img.width) + "x" +
                               std::to_string(img.height));
    }

    static void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

    static std::uint32_t read_u32(std::istream& is, std::uint32_t max = 0xffffffffu) {
        std::uint32_t v = 0;
        if (!is.read(reinterpret_cast<char*>(&v), 4)) throw MalformedRecord("shape model: truncated file");
        if (v > max) throw MalformedRecord("shape model: implausible field value");
        return v;
    }

    int width_;
    std::vector<Stage> stages_;
    std::vector<nn::Param*> params_;
    std::vector<nn::Matrix> acts_;
    std::uint64_t step_ = 0;
};

struct TrainingReport {
    std::vector<double> epoch_loss;
};

/// Trains the shape autoencoder. Normal images are their own targets; with
/// `blank_labels` each anomalous image is paired with the all-zero image,
/// otherwise anomalous images are ignored.
inline ShapeModel train_shape_model(std::span<const BinaryImage> normal, std::span<const BinaryImage> anomalous,
                                    const ShapeTrainConfig& cfg, TrainingReport* report = nullptr,
                                    const std::function<void(int, double)>& on_epoch = {}) {
    cfg.validate();
    if (normal.empty()) throw TrainingFailed("training impossible: empty normal set");
    if (cfg.blank_labels && anomalous.empty())
        throw TrainingFailed("training impossible: blank-label training needs anomalous images");
    for (auto set : {normal, anomalous})
        for (const auto& img : set)
            if (img.width != cfg.image_size || img.height != cfg.image_size)
                throw InvalidInput("training image must be " + std::to_string(cfg.image_size) + "x" +
                                   std::to_string(cfg.image_size));

    struct Sample {
        const BinaryImage* image;
        bool blank;
    };
    std::vector<Sample> samples;
    for (const auto& img : normal) samples.push_back({&img, false});
    if (cfg.blank_labels)
        for (const auto& img : anomalous) samples.push_back({&img, true});

    ShapeModel model(cfg.channel_width);
    model.initialize(cfg.rng_seed);
    nn::Rng order_rng(cfg.rng_seed ^ 0xa5a5a5a5a5a5a5a5ULL);

    const Eigen::Index pixels = Eigen::Index(cfg.image_size) * cfg.image_size;
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
        double total = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + std::size_t(cfg.batch_size));
            const Eigen::Index bs = Eigen::Index(end - start);
            nn::Matrix x(pixels, bs), t(pixels, bs);
            for (Eigen::Index b = 0; b < bs; ++b) {
                const Sample& s = samples[order[start + std::size_t(b)]];
                for (Eigen::Index p = 0; p < pixels; ++p) {
                    const float v = s.image->pixels[std::size_t(p)] ? 1.0f : 0.0f;
                    x(p, b) = v;
                    t(p, b) = s.blank ? 0.0f : v;
                }
            }
            const double loss = model.train_step(x, t, cfg.learning_rate);
            if (!std::isfinite(loss))
                throw TrainingFailed("training diverged: non-finite loss in epoch " + std::to_string(epoch + 1));
            total += loss * double(bs);
            seen += std::size_t(bs);
        }
        const double mean = total / double(seen);
        if (report) report->epoch_loss.push_back(mean);
        if (on_epoch) on_epoch(epoch + 1, mean);
    }
    return model;
}

/// Raw reconstruction losses: MSE between each image and its post-processed
/// reconstruction.
inline std::vector<double> shape_raw_scores(ShapeModel& model, std::span<const BinaryImage> images,
                                            const PostprocessParams& post, bool scale_255 = true) {
    auto recon = model.reconstruct(images);
    std::vector<double> out(images.size());
    for (std::size_t i = 0; i < images.size(); ++i)
        out[i] = reconstruction_mse(images[i], postprocess(recon[i], post), scale_255);
    return out;
}

/// Shape channel of a ScoreSet for one scan, min-max normalized per scan.
inline std::vector<double> shape_scores(const Scan& scan, ShapeModel& model, const PostprocessParams& post,
                                        bool scale_255 = true) {
    std::vector<BinaryImage> images;
    images.reserve(scan.size());
    for (const auto& imp : scan.impurities) {
        if (!imp.shape_image)
            throw InvalidInput("shape_scores: impurity " + std::to_string(imp.id) + " of scan '" + scan.scan_id +
                               "' has no shape image");
        images.push_back(*imp.shape_image);
    }
    auto raw = shape_raw_scores(model, images, post, scale_255);
    return min_max_normalize(raw);
}

} // namespace anomet
