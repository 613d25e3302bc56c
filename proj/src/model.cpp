#include "bprg/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "bprg/error.hpp"
#include "bprg/ops.hpp"

namespace bprg {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

std::string layer_to_string(const LayerSpec& layer) {
  return std::visit(Overloaded{
                        [](const Dense& d) { return "dense(" + std::to_string(d.in) + "," + std::to_string(d.out) + ")"; },
                        [](const Conv3x3& c) {
                          return "conv3x3(" + std::to_string(c.c_in) + "," + std::to_string(c.c_out) + ")";
                        },
                        [](const Flatten&) { return std::string("flatten"); },
                        [](const Relu&) { return std::string("relu"); },
                    },
                    layer);
}

bool has_parameters(const LayerSpec& layer) {
  return std::holds_alternative<Dense>(layer) || std::holds_alternative<Conv3x3>(layer);
}

std::string ParamId::name() const {
  return "L" + std::to_string(layer_index) + (role == ParamRole::weight ? ".weight" : ".bias");
}

ParamId ParamId::parse(std::string_view name) {
  auto fail = [&] { return FormatError("malformed parameter name '" + std::string(name) + "'"); };
  if (name.size() < 2 || name[0] != 'L') throw fail();
  const auto dot = name.find('.');
  if (dot == std::string_view::npos || dot == 1) throw fail();
  std::size_t index = 0;
  const auto digits = name.substr(1, dot - 1);
  if (digits.size() > 1 && digits[0] == '0') throw fail();
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) throw fail();
  const auto role = name.substr(dot + 1);
  if (role == "weight") return {index, ParamRole::weight};
  if (role == "bias") return {index, ParamRole::bias};
  throw fail();
}

namespace {

// Expected (weight, bias) shapes for a parameterised layer.
std::pair<Shape, Shape> param_shapes_for(const LayerSpec& layer) {
  if (const auto* d = std::get_if<Dense>(&layer)) return {Shape{d->in, d->out}, Shape{d->out}};
  const auto& c = std::get<Conv3x3>(layer);
  return {Shape{c.c_out, c.c_in, 3, 3}, Shape{c.c_out}};
}

}  // namespace

Shape propagate_shape(const std::vector<LayerSpec>& spec, const Shape& sample_shape) {
  Shape shape = sample_shape;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const auto fail = [&](const std::string& why) {
      return ConfigError("model layer " + std::to_string(i) + " " + layer_to_string(spec[i]) + ": " + why +
                         " (input " + shape_to_string(shape) + ")");
    };
    std::visit(Overloaded{
                   [&](const Dense& d) {
                     if (d.in == 0 || d.out == 0) throw fail("sizes must be positive");
                     if (shape.size() != 1 || shape[0] != d.in) throw fail("expects a flat input of " + std::to_string(d.in));
                     shape = Shape{d.out};
                   },
                   [&](const Conv3x3& c) {
                     if (c.c_in == 0 || c.c_out == 0) throw fail("channel counts must be positive");
                     if (shape.size() != 3 || shape[0] != c.c_in)
                       throw fail("expects " + std::to_string(c.c_in) + " input channels");
                     if (shape[1] < 3 || shape[2] < 3) throw fail("spatial dims smaller than 3x3");
                     shape = Shape{c.c_out, shape[1] - 2, shape[2] - 2};
                   },
                   [&](const Flatten&) { shape = Shape{shape_numel(shape)}; },
                   [&](const Relu&) {},
               },
               spec[i]);
  }
  if (shape.size() != 1) throw ConfigError("model output " + shape_to_string(shape) + " is not a class vector");
  return shape;
}

template <typename Real>
Model<Real>::Model(std::vector<LayerSpec> spec, std::vector<Parameter<Real>> params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  std::size_t k = 0;
  for (std::size_t i = 0; i < spec_.size(); ++i) {
    if (!has_parameters(spec_[i])) continue;
    const auto [ws, bs] = param_shapes_for(spec_[i]);
    for (const auto& [role, shape] : {std::pair{ParamRole::weight, ws}, std::pair{ParamRole::bias, bs}}) {
      const ParamId want{i, role};
      if (k >= params_.size() || params_[k].id != want)
        throw ConfigError("model: missing parameter " + want.name());
      if (params_[k].value.shape() != shape)
        throw ConfigError("model: parameter " + want.name() + " has shape " +
                          shape_to_string(params_[k].value.shape()) + ", expected " + shape_to_string(shape));
      ++k;
    }
  }
  if (k != params_.size()) throw ConfigError("model: parameter " + params_[k].id.name() + " has no layer");
}

template <typename Real>
std::size_t Model<Real>::param_index(ParamId id) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].id == id) return i;
  throw UsageError("model has no parameter " + id.name());
}

template <typename Real>
BasicTensor<Real>& Model<Real>::param(ParamId id) {
  return params_[param_index(id)].value;
}

template <typename Real>
const BasicTensor<Real>& Model<Real>::param(ParamId id) const {
  return params_[param_index(id)].value;
}

template <typename Real>
std::vector<BasicTensor<Real>*> Model<Real>::param_tensors() {
  std::vector<BasicTensor<Real>*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p.value);
  return out;
}

template <typename Real>
std::vector<Shape> Model<Real>::param_shapes() const {
  std::vector<Shape> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.value.shape());
  return out;
}

template <typename Real>
std::size_t Model<Real>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

template <typename Real>
void Model<Real>::zero_grad() {
  for (auto& p : params_) p.value.zero_grad();
}

template <typename Real>
Model<Real> build_model(std::vector<LayerSpec> spec, const Shape& sample_shape, RngState& rng) {
  propagate_shape(spec, sample_shape);
  std::vector<Parameter<Real>> params;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (!has_parameters(spec[i])) continue;
    auto [ws, bs] = param_shapes_for(spec[i]);
    const std::size_t fan_in = ws.size() == 2 ? ws[0] : ws[1] * 9;
    const double bound = std::sqrt(6.0 / double(fan_in));
    std::vector<Real> w(shape_numel(ws));
    for (auto& v : w) v = Real(bound * (2.0 * rng.uniform() - 1.0));
    params.push_back({ParamId{i, ParamRole::weight}, BasicTensor<Real>(ws, std::move(w), true)});
    params.push_back({ParamId{i, ParamRole::bias}, BasicTensor<Real>(bs, true)});
  }
  return Model<Real>(std::move(spec), std::move(params));
}

template <typename Real>
BasicTensor<Real>& forward(Model<Real>& model, Tape<Real>& tape, BasicTensor<Real>& batch) {
  BasicTensor<Real>* x = &batch;
  const auto& spec = model.spec();
  for (std::size_t i = 0; i < spec.size(); ++i) {
    std::visit(Overloaded{
                   [&](const Dense&) {
                     auto& h = ops::matmul(tape, *x, model.param({i, ParamRole::weight}));
                     x = &ops::add_bias(tape, h, model.param({i, ParamRole::bias}));
                   },
                   [&](const Conv3x3&) {
                     auto& h = ops::conv2d(tape, *x, model.param({i, ParamRole::weight}));
                     x = &ops::add_bias(tape, h, model.param({i, ParamRole::bias}));
                   },
                   [&](const Flatten&) { x = &ops::flatten(tape, *x); },
                   [&](const Relu&) { x = &ops::relu(tape, *x); },
               },
               spec[i]);
  }
  if (x->rank() != 2) throw DimensionError("forward: logits have shape " + shape_to_string(x->shape()));
  return *x;
}

template <typename Real>
std::vector<PrunableSlot> prunable_slots(const Model<Real>& model) {
  std::vector<PrunableSlot> slots;
  const auto& params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].id.role == ParamRole::weight) slots.push_back({params[i].id, params[i].value.numel(), i});
  return slots;
}

std::size_t prunable_total(const std::vector<PrunableSlot>& slots) {
  std::size_t n = 0;
  for (const auto& s : slots) n += s.length;
  return n;
}

template class Model<float>;
template class Model<double>;
template Model<float> build_model(std::vector<LayerSpec>, const Shape&, RngState&);
template Model<double> build_model(std::vector<LayerSpec>, const Shape&, RngState&);
template BasicTensor<float>& forward(Model<float>&, Tape<float>&, BasicTensor<float>&);
template BasicTensor<double>& forward(Model<double>&, Tape<double>&, BasicTensor<double>&);
template std::vector<PrunableSlot> prunable_slots(const Model<float>&);
template std::vector<PrunableSlot> prunable_slots(const Model<double>&);

}  // namespace bprg
