// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include "ladd/model.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "ladd/ops.hpp"
#include "ladd/rng.hpp"

namespace ladd {

namespace {

constexpr std::size_t kSmallCnnWidths[2] = {32, 64};

std::size_t to_size(std::string_view s, std::string_view what) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ConfigError("arch descriptor: bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

ArchSpec ArchSpec::convnet(std::size_t depth, std::size_t channels, std::size_t hw,
                           std::size_t classes, std::size_t width) {
  ArchSpec a;
  a.kind = Kind::convnet;
  a.depth = depth;
  a.in_channels = channels;
  a.in_height = a.in_width = hw;
  a.classes = classes;
  a.net_width = width;
  return a;
}

ArchSpec ArchSpec::mlp(std::vector<std::size_t> hidden, std::size_t in_features,
                       std::size_t classes, Activation act) {
  ArchSpec a;
  a.kind = Kind::mlp;
  a.hidden = std::move(hidden);
  a.in_channels = in_features;
  a.in_height = a.in_width = 1;
  a.classes = classes;
  a.activation = act;
  return a;
}

ArchSpec ArchSpec::smallcnn(std::size_t channels, std::size_t hw, std::size_t classes) {
  ArchSpec a;
  a.kind = Kind::smallcnn;
  a.in_channels = channels;
  a.in_height = a.in_width = hw;
  a.classes = classes;
  return a;
}

std::string ArchSpec::str() const {
  std::ostringstream os;
  const std::string in = "in=" + std::to_string(in_channels) + "x" + std::to_string(in_height) +
                         "x" + std::to_string(in_width);
  switch (kind) {
    case Kind::convnet:
      os << "ConvNetD" << depth << "(w=" << net_width
         << ",norm=" << (instance_norm ? "instance" : "none") << "," << in << ",c=" << classes
         << ")";
      break;
    case Kind::mlp: {
      os << "MLP(";
      for (std::size_t i = 0; i < hidden.size(); ++i) os << (i ? "-" : "") << hidden[i];
      os << ",act=" << (activation == Activation::relu ? "relu" : "softplus") << "," << in
         << ",c=" << classes << ")";
      break;
    }
    case Kind::smallcnn:
      os << "SmallCNN(" << in << ",c=" << classes << ")";
      break;
  }
  return os.str();
}

ArchSpec ArchSpec::parse(std::string_view text) {
  const auto open = text.find('(');
  if (open == std::string_view::npos || text.back() != ')') {
    throw ConfigError("arch descriptor '" + std::string(text) + "' is not NAME(args)");
  }
  const std::string_view name = text.substr(0, open);
  const std::string_view body = text.substr(open + 1, text.size() - open - 2);
  auto items = split(body, ',');

  ArchSpec a;
  if (name.starts_with("ConvNetD")) {
    a.kind = Kind::convnet;
    a.depth = to_size(name.substr(8), "depth");
  } else if (name == "MLP") {
    a.kind = Kind::mlp;
    if (!items.empty() && items.front().find('=') == std::string_view::npos) {
      if (!items.front().empty()) {
        for (auto w : split(items.front(), '-')) a.hidden.push_back(to_size(w, "width"));
      }
      items.erase(items.begin());
    }
  } else if (name == "SmallCNN") {
    a.kind = Kind::smallcnn;
  } else {
    throw ConfigError("unknown architecture '" + std::string(name) + "'");
  }

  for (auto item : items) {
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("arch descriptor: expected key=value, got '" + std::string(item) + "'");
    }
    const auto key = item.substr(0, eq), val = item.substr(eq + 1);
    if (key == "w") {
      a.net_width = to_size(val, "width");
    } else if (key == "norm") {
      if (val != "instance" && val != "none") throw ConfigError("norm must be instance|none");
      a.instance_norm = val == "instance";
    } else if (key == "act") {
      if (val == "relu") {
        a.activation = Activation::relu;
      } else if (val == "softplus") {
        a.activation = Activation::softplus;
      } else {
        throw ConfigError("act must be relu|softplus");
      }
    } else if (key == "in") {
      auto dims = split(val, 'x');
      if (dims.size() != 3) throw ConfigError("in= must be CxHxW");
      a.in_channels = to_size(dims[0], "channels");
      a.in_height = to_size(dims[1], "height");
      a.in_width = to_size(dims[2], "width");
    } else if (key == "c") {
      a.classes = to_size(val, "classes");
    } else {
      throw ConfigError("arch descriptor: unknown key '" + std::string(key) + "'");
    }
  }
  if (a.classes < 2) throw ConfigError("arch needs at least 2 classes");
  if (a.kind != Kind::mlp) {
    const std::size_t pools = a.kind == Kind::convnet ? a.depth : 2;
    if (a.kind == Kind::convnet && a.depth == 0) throw ConfigError("ConvNet depth must be >= 1");
    if (a.in_height < (std::size_t{1} << pools) || a.in_width < (std::size_t{1} << pools)) {
      throw ConfigError(a.str() + ": input smaller than 2^" + std::to_string(pools));
    }
  }
  return a;
}

// ---------------------------------------------------------------- Model

template <typename T>
Model<T>::Model(ArchSpec arch, std::vector<Param<T>> params, std::uint64_t init_seed)
    : arch_(std::move(arch)), params_(std::move(params)), init_seed_(init_seed) {
  auto fresh = create(arch_, 0);
  if (fresh.params_.size() != params_.size()) {
    throw ShapeError(arch_.str() + " expects " + std::to_string(fresh.params_.size()) +
                     " parameter tensors, got " + std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (fresh.params_[i].name != params_[i].name ||
        fresh.params_[i].value.shape() != params_[i].value.shape()) {
      throw ShapeError(arch_.str() + ": parameter " + std::to_string(i) + " expected '" +
                       fresh.params_[i].name + "' " + shape_str(fresh.params_[i].value.shape()) +
                       ", got '" + params_[i].name + "' " + shape_str(params_[i].value.shape()));
    }
  }
}

template <typename T>
Model<T> Model<T>::create(const ArchSpec& arch, std::uint64_t init_seed) {
  Model m;
  m.arch_ = arch;
  m.init_seed_ = init_seed;
  std::uint64_t stream = 0;
  auto add_dense = [&](const std::string& name, Shape wshape, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Rng rw(derive_seed(init_seed, stream++));
    Tensor<T> w(wshape);
    for (auto& v : w.storage()) v = static_cast<T>(rw.uniform(-bound, bound));
    Rng rb(derive_seed(init_seed, stream++));
    Tensor<T> b(Shape{wshape[0]});
    for (auto& v : b.storage()) v = static_cast<T>(rb.uniform(-bound, bound));
    m.params_.push_back({name + ".weight", std::move(w)});
    m.params_.push_back({name + ".bias", std::move(b)});
  };

  switch (arch.kind) {
    case ArchSpec::Kind::convnet: {
      std::size_t ch = arch.in_channels, h = arch.in_height, w = arch.in_width;
      for (std::size_t d = 0; d < arch.depth; ++d) {
        const std::string idx = std::to_string(d);
        add_dense("conv" + idx, {arch.net_width, ch, 3, 3}, ch * 9);
        if (arch.instance_norm) {
          m.params_.push_back({"norm" + idx + ".gamma", Tensor<T>(Shape{arch.net_width}, T(1))});
          m.params_.push_back({"norm" + idx + ".beta", Tensor<T>(Shape{arch.net_width}, T(0))});
        }
        ch = arch.net_width;
        h /= 2;
        w /= 2;
      }
      add_dense("head", {arch.classes, ch * h * w}, ch * h * w);
      break;
    }
    case ArchSpec::Kind::smallcnn: {
      std::size_t ch = arch.in_channels, h = arch.in_height, w = arch.in_width;
      for (std::size_t d = 0; d < 2; ++d) {
        add_dense("conv" + std::to_string(d), {kSmallCnnWidths[d], ch, 3, 3}, ch * 9);
        ch = kSmallCnnWidths[d];
        h /= 2;
        w /= 2;
      }
      add_dense("head", {arch.classes, ch * h * w}, ch * h * w);
      break;
    }
    case ArchSpec::Kind::mlp: {
      std::size_t in = arch.input_features();
      for (std::size_t i = 0; i < arch.hidden.size(); ++i) {
        add_dense("fc" + std::to_string(i), {arch.hidden[i], in}, in);
        in = arch.hidden[i];
      }
      add_dense("head", {arch.classes, in}, in);
      break;
    }
  }
  return m;
}

template <typename T>
std::size_t Model<T>::param_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

template <typename T>
std::vector<Var<T>> Model<T>::param_vars(bool requires_grad) const {
  std::vector<Var<T>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(Var<T>::leaf(p.value, requires_grad));
  return out;
}

template <typename T>
void Model<T>::set_params(std::span<const Var<T>> values) {
  if (values.size() != params_.size()) throw ShapeError("set_params: parameter count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].shape() != params_[i].value.shape()) {
      throw ShapeError("set_params: '" + params_[i].name + "' expects " +
                       shape_str(params_[i].value.shape()));
    }
    params_[i].value = values[i].value();
  }
}

template <typename T>
void Model<T>::set_params(std::span<const Tensor<T>> values) {
  if (values.size() != params_.size()) throw ShapeError("set_params: parameter count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].shape() != params_[i].value.shape()) {
      throw ShapeError("set_params: '" + params_[i].name + "' expects " +
                       shape_str(params_[i].value.shape()));
    }
    params_[i].value = values[i];
  }
}

template <typename T>
void Model<T>::check_input(const Var<T>& batch) const {
  const Shape& s = batch.shape();
  const Shape want = arch_.input_shape();
  bool ok = s.size() == 4 && Shape(s.begin() + 1, s.end()) == want;
  if (arch_.kind == ArchSpec::Kind::mlp && s.size() >= 2) {
    std::size_t per = 1;
    for (std::size_t i = 1; i < s.size(); ++i) per *= s[i];
    ok = per == arch_.input_features();
  }
  if (!ok) {
    throw ShapeError(arch_.str() + ": expected input [B, " + std::to_string(want[0]) + ", " +
                     std::to_string(want[1]) + ", " + std::to_string(want[2]) + "], got " +
                     shape_str(s));
  }
}

template <typename T>
Var<T> Model<T>::trunk(std::span<const Var<T>> p, const Var<T>& batch) const {
  check_input(batch);
  if (p.size() != params_.size()) {
    throw ShapeError(arch_.str() + ": forward got " + std::to_string(p.size()) +
                     " parameter tensors, expected " + std::to_string(params_.size()));
  }
  const std::size_t b = batch.shape()[0];
  std::size_t k = 0;
  Var<T> x = batch;
  switch (arch_.kind) {
    case ArchSpec::Kind::convnet:
      for (std::size_t d = 0; d < arch_.depth; ++d) {
        x = conv2d(x, p[k], p[k + 1]);
        k += 2;
        if (arch_.instance_norm) {
          x = instance_norm(x, p[k], p[k + 1]);
          k += 2;
        }
        x = avg_pool2x2(relu(x));
      }
      return reshape(x, Shape{b, x.numel() / b});
    case ArchSpec::Kind::smallcnn:
      for (std::size_t d = 0; d < 2; ++d) {
        x = avg_pool2x2(relu(conv2d(x, p[k], p[k + 1])));
        k += 2;
      }
      return reshape(x, Shape{b, x.numel() / b});
    case ArchSpec::Kind::mlp:
      x = reshape(x, Shape{b, arch_.input_features()});
      for (std::size_t i = 0; i < arch_.hidden.size(); ++i) {
        x = linear(x, p[k], p[k + 1]);
        k += 2;
        x = arch_.activation == Activation::relu ? relu(x) : softplus(x);
      }
      return x;
  }
  return x;
}

template <typename T>
Var<T> Model<T>::features(std::span<const Var<T>> params, const Var<T>& batch) const {
  return trunk(params, batch);
}

template <typename T>
Var<T> Model<T>::forward(std::span<const Var<T>> params, const Var<T>& batch) const {
  auto f = trunk(params, batch);
  const std::size_t n = params.size();
  return linear(f, params[n - 2], params[n - 1]);
}

template <typename T>
Var<T> Model<T>::forward(const Var<T>& batch) const {
  auto p = param_vars(false);
  return forward(p, batch);
}

template <typename T>
Tensor<T> Model<T>::logits(const Tensor<T>& batch, std::size_t chunk) const {
  NoGradGuard no_grad;
  auto p = param_vars(false);
  const std::size_t n = batch.dim(0);
  if (n <= chunk) return forward(p, Var<T>::constant(batch)).value();
  Tensor<T> out(Shape{n, arch_.classes});
  for (std::size_t b0 = 0; b0 < n; b0 += chunk) {
    const std::size_t b1 = std::min(n, b0 + chunk);
    auto part = forward(p, Var<T>::constant(slice_rows(batch, b0, b1))).value();
    std::copy(part.storage().begin(), part.storage().end(), out.data() + b0 * arch_.classes);
  }
  return out;
}

template <typename T>
template <typename U>
Model<U> Model<T>::cast() const {
  std::vector<Param<U>> ps;
  ps.reserve(params_.size());
  for (const auto& p : params_) ps.push_back({p.name, p.value.template cast<U>()});
  return Model<U>(arch_, std::move(ps), init_seed_);
}

template class Model<float>;
template class Model<double>;
template Model<double> Model<float>::cast<double>() const;
template Model<float> Model<double>::cast<float>() const;

}  // namespace ladd
