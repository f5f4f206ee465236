#include "natlearn/metric.hpp"

#include <cmath>
#include <sstream>

namespace natlearn {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

MetricMatrix symmetrized(Matrix g) {
  MetricMatrix m;
  m.entries = 0.5 * (g + g.transpose());
  return m;
}

}  // namespace

bool MetricSpec::per_atom() const {
  return std::visit(overloaded{[](const OuterProductAtX&) { return true; },
                               [](const FromJointMeasure& j) { return j.per_atom; },
                               [](const auto&) { return false; }},
                    kind);
}

std::string MetricSpec::describe() const {
  return std::visit(overloaded{[](const Identity&) { return std::string("identity"); },
                               [](const ClosedFormFisher&) { return std::string("closed-form-fisher"); },
                               [](const FromJointMeasure& j) {
                                 return std::string(j.per_atom ? "joint-measure-per-atom" : "joint-measure");
                               },
                               [](const FisherSampled& s) {
                                 std::ostringstream o;
                                 o << "sampled-" << (s.source == SampleSource::Model ? "model" : "uniform") << "-"
                                   << s.samples;
                                 return o.str();
                               },
                               [](const OuterProductAtX&) { return std::string("outer-product-at-x"); },
                               [](const MeasureGram&) { return std::string("measure-gram"); }},
                    kind);
}

MetricMatrix metric_from_joint(const ParamFunction& f, const ParamVector& beta, const JointMeasure& p) {
  require_scalar_output(f);
  if (p.size() == 0) throw Error("metric_from_joint: empty joint measure");
  const auto n = f.param_dim();
  Matrix g = Matrix::Zero(n, n);
  for (const auto& atom : p.atoms()) {
    if (atom.probability == 0.0) continue;
    const ParamVector gx = f.grad(atom.x, beta);
    if (atom.x.size() == atom.y.size() && atom.x == atom.y) {
      g.noalias() += atom.probability * gx * gx.transpose();
    } else {
      const ParamVector gy = f.grad(atom.y, beta);
      g.noalias() += atom.probability * gx * gy.transpose();
    }
  }
  return symmetrized(std::move(g));
}

MetricMatrix fisher_gaussian_closed_form(double /*mu*/, double sigma_k, int k) {
  if (!(sigma_k > 0.0)) throw Error("fisher_gaussian_closed_form: sigma^k must be positive");
  if (k < 1) throw Error("fisher_gaussian_closed_form: k must be a positive integer");
  MetricMatrix m;
  m.entries = Matrix::Zero(2, 2);
  const double sigma_sq = std::pow(sigma_k, 2.0 / k);
  m.entries(0, 0) = 1.0 / sigma_sq;
  // sigma^{2k} = (sigma^k)^2
  m.entries(1, 1) = 2.0 / (static_cast<double>(k) * k * sigma_k * sigma_k);
  return m;
}

ParamVector steepest_direction(const ParamFunction& f, const InputPoint& x, const ParamVector& beta,
                               const MetricMatrix& g) {
  return pinv(g) * f.grad(x, beta);
}

JointMeasure sample_joint_measure(const ParamFunction& f, const ParamVector& beta, int samples, SampleSource source,
                                  double uniform_half_width, std::mt19937_64& engine) {
  if (samples < 1) throw Error("sampled metric: sample count must be >= 1");
  const DensityModel* model = f.density_model();
  if (model == nullptr) throw Error("sampled metric: " + f.label() + " does not describe a distribution");
  std::vector<InputPoint> points;
  points.reserve(static_cast<std::size_t>(samples));
  if (source == SampleSource::Model) {
    for (int s = 0; s < samples; ++s) points.push_back(model->quantile(beta, unit_uniform(engine)));
  } else {
    const auto [loc, scale] = model->location_scale(beta);
    const double lo = loc - uniform_half_width * scale;
    const double width = 2.0 * uniform_half_width * scale;
    for (int s = 0; s < samples; ++s) points.push_back(scalar_input(lo + width * unit_uniform(engine)));
  }
  return JointMeasure::diagonal(points);
}

MetricMatrix estimate_metric(const MetricSpec& spec, const ParamFunction& f, const ParamVector& beta, int iteration,
                             const SignedMeasure& mu, const InputPoint* z, const RandomStreams& streams) {
  const auto n = f.param_dim();
  return std::visit(
      overloaded{
          [&](const MetricSpec::Identity&) {
            MetricMatrix m;
            m.entries = Matrix::Identity(n, n);
            return m;
          },
          [&](const MetricSpec::ClosedFormFisher&) {
            auto fisher = f.closed_form_fisher(beta);
            if (!fisher) throw Error("closed-form Fisher unavailable for " + f.label());
            MetricMatrix m;
            m.entries = std::move(*fisher);
            return m;
          },
          [&](const MetricSpec::FromJointMeasure& j) {
            static const InputPoint kNoAtom = InputPoint::Zero(1);
            return metric_from_joint(f, beta, j.provider(iteration, z != nullptr ? *z : kNoAtom));
          },
          [&](const MetricSpec::FisherSampled& s) {
            auto engine = streams.engine("metric", static_cast<std::uint64_t>(iteration));
            return metric_from_joint(f, beta,
                                     sample_joint_measure(f, beta, s.samples, s.source, s.uniform_half_width, engine));
          },
          [&](const MetricSpec::OuterProductAtX&) {
            if (z == nullptr) throw Error("outer-product metric needs the atom input");
            const ParamVector g = f.grad(*z, beta);
            MetricMatrix m;
            m.entries = g * g.transpose();
            return m;
          },
          [&](const MetricSpec::MeasureGram&) {
            const double total = mu.total_weight();
            if (mu.empty() || total == 0.0) throw Error("measure-gram metric: update measure has zero total weight");
            return symmetrized(f.weighted_gram(mu, beta) / total);
          }},
      spec.kind);
}

}  // namespace natlearn
