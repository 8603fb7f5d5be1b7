#include "xview/models.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "xview/error.hpp"

namespace xview {

using nlohmann::json;

std::string to_string(Direction d) {
  switch (d) {
    case Direction::ego2side: return "ego2side";
    case Direction::side2ego: return "side2ego";
    case Direction::ego2top: return "ego2top";
    case Direction::top2ego: return "top2ego";
  }
  throw Error("unknown direction");
}

Direction direction_from_string(const std::string& s) {
  if (s == "ego2side") return Direction::ego2side;
  if (s == "side2ego") return Direction::side2ego;
  if (s == "ego2top") return Direction::ego2top;
  if (s == "top2ego") return Direction::top2ego;
  throw Error("unknown direction: " + s);
}

bool direction_is_ego_source(Direction d) {
  return d == Direction::ego2side || d == Direction::ego2top;
}

View direction_exo_view(Direction d) {
  return (d == Direction::ego2side || d == Direction::side2ego) ? View::side
                                                                : View::top;
}

std::string MapperModel::variant_name(Variant v) {
  switch (v) {
    case Variant::direct: return "direct";
    case Variant::linear: return "linear";
    case Variant::ridge: return "ridge";
    case Variant::reconstruction: return "reconstruction";
  }
  throw Error("unknown mapper variant");
}

MapperModel::Variant MapperModel::variant_from_string(const std::string& s) {
  if (s == "direct") return Variant::direct;
  if (s == "linear") return Variant::linear;
  if (s == "ridge") return Variant::ridge;
  if (s == "reconstruction") return Variant::reconstruction;
  throw Error("unknown mapper variant: " + s);
}

Eigen::MatrixXd MapperModel::map(const Eigen::MatrixXd& x) const {
  switch (variant) {
    case Variant::direct:
      return x;
    case Variant::linear:
    case Variant::ridge: {
      if (x.cols() != weights.cols())
        throw Error("map_features: input dim " + std::to_string(x.cols()) +
                    " does not match model dim " + std::to_string(weights.cols()));
      Eigen::MatrixXd out = x * weights.transpose();
      if (bias.size() > 0) out.rowwise() += bias.transpose();
      return out;
    }
    case Variant::reconstruction: {
      Network& n = const_cast<Network&>(net);  // infer mode does not mutate
      return forward(n, x, Mode::infer);
    }
  }
  throw Error("unknown mapper variant");
}

Eigen::VectorXd MapperModel::map(const Eigen::VectorXd& x) const {
  return map(Eigen::MatrixXd(x.transpose())).row(0).transpose();
}

namespace {

// Appends a column of ones when fitting with a bias term.
Eigen::MatrixXd with_bias_column(const Eigen::MatrixXd& x, bool with_bias) {
  if (!with_bias) return x;
  Eigen::MatrixXd xb(x.rows(), x.cols() + 1);
  xb.leftCols(x.cols()) = x;
  xb.col(x.cols()).setOnes();
  return xb;
}

void split_bias(const Eigen::MatrixXd& wt, bool with_bias, MapperModel& m) {
  // wt is (d_s [+1]) x d_t, i.e. the transpose of the solved system.
  if (with_bias) {
    m.weights = wt.topRows(wt.rows() - 1).transpose();
    m.bias = wt.row(wt.rows() - 1).transpose();
  } else {
    m.weights = wt.transpose();
    m.bias.resize(0);
  }
}

}  // namespace

MapperModel fit_ols(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                    bool with_bias) {
  if (x.rows() != y.rows()) throw Error("fit_ols: X/Y row count mismatch");
  if (!x.allFinite() || !y.allFinite()) throw Error("fit_ols: non-finite input");
  const Eigen::MatrixXd xb = with_bias_column(x, with_bias);
  if (xb.rows() < xb.cols())
    throw Error("fit_ols: fewer rows than columns; use fit_ridge");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xb);
  qr.setThreshold(1e-10);
  if (qr.rank() < xb.cols())
    throw Error("fit_ols: rank-deficient design matrix (rank " +
                std::to_string(qr.rank()) + " < " + std::to_string(xb.cols()) +
                "); use fit_ridge with lambda > 0");
  MapperModel m;
  m.variant = MapperModel::Variant::linear;
  split_bias(qr.solve(y), with_bias, m);
  return m;
}

MapperModel fit_ridge(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                      double lambda, bool with_bias) {
  if (x.rows() != y.rows()) throw Error("fit_ridge: X/Y row count mismatch");
  if (!x.allFinite() || !y.allFinite()) throw Error("fit_ridge: non-finite input");
  if (lambda < 0.0) throw Error("fit_ridge: lambda must be >= 0");
  if (lambda == 0.0) {
    MapperModel m = fit_ols(x, y, with_bias);
    m.variant = MapperModel::Variant::ridge;
    m.lambda = 0.0;
    return m;
  }
  const Eigen::MatrixXd xb = with_bias_column(x, with_bias);
  const Eigen::Index d = xb.cols();
  Eigen::MatrixXd gram = xb.transpose() * xb;
  gram.diagonal().array() += lambda;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  MapperModel m;
  m.variant = MapperModel::Variant::ridge;
  m.lambda = lambda;
  split_bias(ldlt.solve(xb.transpose() * y), with_bias, m);
  (void)d;
  return m;
}

namespace {

std::vector<BlockSpec> reconstruction_specs(FeatureKind kind) {
  std::vector<int> dims;
  switch (kind) {
    case FeatureKind::hoof32: dims = {32, 64, 128, 64, 32}; break;
    case FeatureKind::c3d128: dims = {128, 256, 256, 128, 128}; break;
    default:
      throw Error("reconstruction net supports hoof32 or c3d128 features");
  }
  // One block per quoted layer width; the first block maps the input onto
  // the same width (hoof32: 32 -> 32, c3d128: 128 -> 128).
  std::vector<BlockSpec> specs;
  for (int d : dims) specs.push_back({d, true, Activation::relu});
  // Output layer: plain affine, signed targets.
  specs.back() = {dims.back(), false, Activation::identity};
  return specs;
}

std::vector<BlockSpec> stream_specs(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::hoof32:
      return {{64, true, Activation::relu}, {128, true, Activation::relu}};
    case FeatureKind::c3d128:
      return {{128, true, Activation::relu}, {256, true, Activation::relu}};
    default:
      throw Error("two-stream scorer supports hoof32 or c3d128 features");
  }
}

}  // namespace

Network build_reconstruction_net(FeatureKind kind, Rng rng) {
  const int in_dim = kind == FeatureKind::hoof32 ? 32 : 128;
  return Network::build(in_dim, reconstruction_specs(kind), rng);
}

TwoStreamScorer build_two_stream(FeatureKind kind, Rng rng) {
  const int in_dim = kind == FeatureKind::hoof32 ? 32 : 128;
  TwoStreamScorer s;
  s.kind = kind;
  s.stream_source = Network::build(in_dim, stream_specs(kind), rng.stream("source"));
  s.stream_target = Network::build(in_dim, stream_specs(kind), rng.stream("target"));
  // Damp the output scale of each stream at init. The embeddings are
  // nonnegative after ReLU, so unit-gamma streams start with large positive
  // dot products that pin the sigmoid head at 1 and stall training.
  for (Network* n : {&s.stream_source, &s.stream_target})
    if (n->blocks.back().bn) n->blocks.back().bn->gamma *= 0.1;
  return s;
}

Eigen::VectorXd score_batch(TwoStreamScorer& s, const Eigen::MatrixXd& x_src,
                            const Eigen::MatrixXd& x_tgt) {
  if (x_src.rows() != x_tgt.rows())
    throw Error("score_batch: row count mismatch");
  const Eigen::MatrixXd a = forward(s.stream_source, x_src, Mode::infer);
  const Eigen::MatrixXd b = forward(s.stream_target, x_tgt, Mode::infer);
  const Eigen::VectorXd z = (a.array() * b.array()).rowwise().sum();
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

double score_pair(TwoStreamScorer& s, const Eigen::VectorXd& x_src,
                  const Eigen::VectorXd& x_tgt) {
  return score_batch(s, x_src.transpose(), x_tgt.transpose())[0];
}

namespace {

void write_f32(std::ostream& os, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  unsigned char b[4] = {static_cast<unsigned char>(bits & 0xff),
                        static_cast<unsigned char>((bits >> 8) & 0xff),
                        static_cast<unsigned char>((bits >> 16) & 0xff),
                        static_cast<unsigned char>((bits >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

float read_f32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                       (static_cast<std::uint32_t>(b[1]) << 8) |
                       (static_cast<std::uint32_t>(b[2]) << 16) |
                       (static_cast<std::uint32_t>(b[3]) << 24);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

void write_vec(std::ostream& os, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) write_f32(os, static_cast<float>(v[i]));
}

void read_vec(std::istream& is, Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = read_f32(is);
}

void write_mat(std::ostream& os, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      write_f32(os, static_cast<float>(m(r, c)));
}

void read_mat(std::istream& is, Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = read_f32(is);
}

json network_arch(const Network& net) {
  json arch;
  arch["input_dim"] = net.input_dim;
  arch["blocks"] = json::array();
  for (const auto& b : net.blocks) {
    json bj;
    bj["out_dim"] = b.dense.bias.size();
    bj["batch_norm"] = b.bn.has_value();
    bj["activation"] = b.act == Activation::relu ? "relu" : "identity";
    if (b.bn) {
      bj["momentum"] = b.bn->momentum;
      bj["epsilon"] = b.bn->epsilon;
    }
    arch["blocks"].push_back(bj);
  }
  return arch;
}

Network network_from_arch(const json& arch) {
  std::vector<BlockSpec> specs;
  for (const auto& bj : arch.at("blocks")) {
    BlockSpec s;
    s.out_dim = bj.at("out_dim").get<int>();
    s.batch_norm = bj.at("batch_norm").get<bool>();
    s.act = bj.at("activation").get<std::string>() == "relu" ? Activation::relu
                                                             : Activation::identity;
    specs.push_back(s);
  }
  Network net = Network::build(arch.at("input_dim").get<int>(), specs, Rng(0));
  for (std::size_t i = 0; i < net.blocks.size(); ++i) {
    if (net.blocks[i].bn) {
      const auto& bj = arch.at("blocks")[i];
      net.blocks[i].bn->momentum = bj.value("momentum", 0.99);
      net.blocks[i].bn->epsilon = bj.value("epsilon", 1e-3);
    }
  }
  return net;
}

// Parameters plus BatchNorm running stats, in declaration order.
void write_network(std::ostream& os, const Network& net) {
  for (const auto& b : net.blocks) {
    write_mat(os, b.dense.weights);
    write_vec(os, b.dense.bias);
    if (b.bn) {
      write_vec(os, b.bn->gamma);
      write_vec(os, b.bn->beta);
      write_vec(os, b.bn->running_mean);
      write_vec(os, b.bn->running_var);
    }
  }
}

void read_network(std::istream& is, Network& net) {
  for (auto& b : net.blocks) {
    read_mat(is, b.dense.weights);
    read_vec(is, b.dense.bias);
    if (b.bn) {
      read_vec(is, b.bn->gamma);
      read_vec(is, b.bn->beta);
      read_vec(is, b.bn->running_mean);
      read_vec(is, b.bn->running_var);
    }
  }
}

void write_meta(const std::string& dir, const json& meta) {
  std::filesystem::create_directories(dir);
  std::ofstream os(dir + "/meta.json");
  if (!os) throw Error("cannot open for writing: " + dir + "/meta.json");
  os << meta.dump(2) << "\n";
}

json read_meta(const std::string& dir) {
  std::ifstream is(dir + "/meta.json");
  if (!is) throw Error("cannot open model meta: " + dir + "/meta.json");
  return json::parse(is);
}

}  // namespace

std::string model_dir_variant(const std::string& dir) {
  return read_meta(dir).at("variant").get<std::string>();
}

void save_model(const MapperModel& m, const std::string& dir) {
  json meta;
  meta["variant"] = MapperModel::variant_name(m.variant);
  meta["source_kind"] = to_string(m.source_kind);
  meta["target_kind"] = to_string(m.target_kind);
  meta["direction"] = to_string(m.direction);
  if (m.variant == MapperModel::Variant::linear ||
      m.variant == MapperModel::Variant::ridge) {
    meta["rows"] = m.weights.rows();
    meta["cols"] = m.weights.cols();
    meta["has_bias"] = m.bias.size() > 0;
    meta["lambda"] = m.lambda;
  } else if (m.variant == MapperModel::Variant::reconstruction) {
    meta["arch"] = network_arch(m.net);
  }
  write_meta(dir, meta);

  std::ofstream os(dir + "/weights.bin", std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + dir + "/weights.bin");
  if (m.variant == MapperModel::Variant::linear ||
      m.variant == MapperModel::Variant::ridge) {
    write_mat(os, m.weights);
    if (m.bias.size() > 0) write_vec(os, m.bias);
  } else if (m.variant == MapperModel::Variant::reconstruction) {
    write_network(os, m.net);
  }
  if (!os) throw Error("write failed: " + dir + "/weights.bin");
}

MapperModel load_mapper(const std::string& dir) {
  const json meta = read_meta(dir);
  MapperModel m;
  m.variant = MapperModel::variant_from_string(meta.at("variant").get<std::string>());
  m.source_kind = feature_kind_from_string(meta.at("source_kind").get<std::string>());
  m.target_kind = feature_kind_from_string(meta.at("target_kind").get<std::string>());
  m.direction = direction_from_string(meta.at("direction").get<std::string>());

  std::ifstream is(dir + "/weights.bin", std::ios::binary);
  if (m.variant == MapperModel::Variant::linear ||
      m.variant == MapperModel::Variant::ridge) {
    if (!is) throw Error("cannot open: " + dir + "/weights.bin");
    m.weights.resize(meta.at("rows").get<Eigen::Index>(),
                     meta.at("cols").get<Eigen::Index>());
    read_mat(is, m.weights);
    if (meta.value("has_bias", false)) {
      m.bias.resize(m.weights.rows());
      read_vec(is, m.bias);
    }
    m.lambda = meta.value("lambda", 0.0);
    if (!is) throw Error("truncated weights: " + dir + "/weights.bin");
  } else if (m.variant == MapperModel::Variant::reconstruction) {
    if (!is) throw Error("cannot open: " + dir + "/weights.bin");
    m.net = network_from_arch(meta.at("arch"));
    read_network(is, m.net);
    if (!is) throw Error("truncated weights: " + dir + "/weights.bin");
  }
  return m;
}

void save_model(const TwoStreamScorer& s, const std::string& dir) {
  json meta;
  meta["variant"] = "two_stream";
  meta["kind"] = to_string(s.kind);
  meta["direction"] = to_string(s.direction);
  meta["arch_source"] = network_arch(s.stream_source);
  meta["arch_target"] = network_arch(s.stream_target);
  write_meta(dir, meta);

  std::ofstream os(dir + "/weights.bin", std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + dir + "/weights.bin");
  write_network(os, s.stream_source);
  write_network(os, s.stream_target);
  if (!os) throw Error("write failed: " + dir + "/weights.bin");
}

TwoStreamScorer load_scorer(const std::string& dir) {
  const json meta = read_meta(dir);
  if (meta.at("variant").get<std::string>() != "two_stream")
    throw Error("model at " + dir + " is not a two-stream scorer");
  TwoStreamScorer s;
  s.kind = feature_kind_from_string(meta.at("kind").get<std::string>());
  s.direction = direction_from_string(meta.at("direction").get<std::string>());
  s.stream_source = network_from_arch(meta.at("arch_source"));
  s.stream_target = network_from_arch(meta.at("arch_target"));
  std::ifstream is(dir + "/weights.bin", std::ios::binary);
  if (!is) throw Error("cannot open: " + dir + "/weights.bin");
  read_network(is, s.stream_source);
  read_network(is, s.stream_target);
  if (!is) throw Error("truncated weights: " + dir + "/weights.bin");
  return s;
}

}  // namespace xview
