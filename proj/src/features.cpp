#include "xview/features.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "xview/error.hpp"

namespace xview {

using nlohmann::json;

std::string to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::hoof32: return "hoof32";
    case FeatureKind::c3d4096: return "c3d4096";
    case FeatureKind::c3d128: return "c3d128";
  }
  throw Error("unknown feature kind");
}

FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "hoof32") return FeatureKind::hoof32;
  if (s == "c3d4096") return FeatureKind::c3d4096;
  if (s == "c3d128") return FeatureKind::c3d128;
  throw Error("unknown feature kind: " + s);
}

int feature_dim(FeatureKind k) {
  switch (k) {
    case FeatureKind::hoof32: return 32;
    case FeatureKind::c3d4096: return 4096;
    case FeatureKind::c3d128: return 128;
  }
  throw Error("unknown feature kind");
}

FeatureMatrix FeatureMatrix::from_rows(FeatureKind kind, std::vector<std::string> ids,
                                       Eigen::MatrixXd data) {
  if (static_cast<Eigen::Index>(ids.size()) != data.rows())
    throw Error("FeatureMatrix::from_rows: ids/data row count mismatch");
  FeatureMatrix out(kind, static_cast<int>(data.cols()));
  out.data_ = std::move(data);
  out.ids_ = std::move(ids);
  for (std::size_t i = 0; i < out.ids_.size(); ++i) {
    if (!out.index_.emplace(out.ids_[i], static_cast<int>(i)).second)
      throw Error("duplicate feature row for clip '" + out.ids_[i] + "'");
  }
  return out;
}

void FeatureMatrix::add_row(const std::string& clip_id, const Eigen::VectorXd& row) {
  if (row.size() != dim_)
    throw Error("feature row for '" + clip_id + "' has dim " +
                std::to_string(row.size()) + ", expected " + std::to_string(dim_));
  if (index_.count(clip_id))
    throw Error("duplicate feature row for clip '" + clip_id + "'");
  index_[clip_id] = static_cast<int>(ids_.size());
  ids_.push_back(clip_id);
  data_.conservativeResize(static_cast<Eigen::Index>(ids_.size()), dim_);
  data_.row(static_cast<Eigen::Index>(ids_.size()) - 1) = row.transpose();
}

Eigen::VectorXd FeatureMatrix::row(const std::string& clip_id) const {
  return data_.row(row_index(clip_id)).transpose();
}

int FeatureMatrix::row_index(const std::string& clip_id) const {
  auto it = index_.find(clip_id);
  if (it == index_.end())
    throw Error("missing feature for clip '" + clip_id + "'");
  return it->second;
}

namespace {

constexpr char kFeatMagic[4] = {'X', 'V', 'F', 'T'};

void write_u32(std::ostream& os, std::uint32_t x) {
  unsigned char b[4] = {static_cast<unsigned char>(x & 0xff),
                        static_cast<unsigned char>((x >> 8) & 0xff),
                        static_cast<unsigned char>((x >> 16) & 0xff),
                        static_cast<unsigned char>((x >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f32(std::ostream& os, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  write_u32(os, bits);
}

float read_f32(std::istream& is) {
  const std::uint32_t bits = read_u32(is);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

void FeatureMatrix::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + path);
  os.write(kFeatMagic, 4);
  write_u32(os, 1);
  write_u32(os, static_cast<std::uint32_t>(rows()));
  write_u32(os, static_cast<std::uint32_t>(dim_));
  for (int r = 0; r < rows(); ++r)
    for (int c = 0; c < dim_; ++c) write_f32(os, static_cast<float>(data_(r, c)));
  if (!os) throw Error("write failed: " + path);

  json sidecar;
  sidecar["kind"] = to_string(kind_);
  json idx = json::object();
  for (const auto& [id, r] : index_) idx[id] = r;
  sidecar["index"] = idx;
  std::ofstream js(path + ".json");
  if (!js) throw Error("cannot open for writing: " + path + ".json");
  js << sidecar.dump(2) << "\n";
}

FeatureMatrix FeatureMatrix::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kFeatMagic, 4) != 0)
    throw Error("bad feature store magic in " + path);
  if (read_u32(is) != 1) throw Error("unsupported feature store version in " + path);
  const std::uint32_t rows = read_u32(is);
  const std::uint32_t dim = read_u32(is);

  std::ifstream js(path + ".json");
  if (!js) throw Error("missing feature store sidecar: " + path + ".json");
  json sidecar = json::parse(js);

  FeatureMatrix out(feature_kind_from_string(sidecar.at("kind").get<std::string>()),
                    static_cast<int>(dim));
  out.data_.resize(rows, dim);
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < dim; ++c) out.data_(r, c) = read_f32(is);
  if (!is) throw Error("truncated feature store: " + path);

  out.ids_.resize(rows);
  for (auto it = sidecar.at("index").begin(); it != sidecar.at("index").end(); ++it) {
    const int r = it.value().get<int>();
    if (r < 0 || r >= static_cast<int>(rows))
      throw Error("sidecar row index out of range for clip '" + it.key() + "'");
    out.ids_[r] = it.key();
    out.index_[it.key()] = r;
  }
  if (out.index_.size() != rows)
    throw Error("sidecar index does not cover all rows in " + path);
  return out;
}

Eigen::VectorXd hoof(const FlowClip& clip, int bin_count) {
  if (clip.fields.empty()) throw Error("hoof: empty clip");
  if (bin_count < 2) throw Error("hoof: bin_count must be >= 2");

  Eigen::VectorXd bins = Eigen::VectorXd::Zero(bin_count);
  const double two_pi = 2.0 * M_PI;
  for (const auto& f : clip.fields) {
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double mag = std::hypot(f.u[i], f.v[i]);
      if (mag == 0.0) continue;
      double theta = std::atan2(f.v[i], f.u[i]);
      if (theta < 0.0) theta += two_pi;
      int b = static_cast<int>(theta * bin_count / two_pi);
      if (b >= bin_count) b = bin_count - 1;
      bins[b] += mag;
    }
  }
  const double total = bins.sum();
  if (total == 0.0)
    return Eigen::VectorXd::Constant(bin_count, 1.0 / bin_count);
  return bins / total;
}

PcaModel pca_fit(const FeatureMatrix& x, int out_dim) {
  const int n = x.rows();
  const int d = x.dim();
  if (n <= out_dim)
    throw Error("pca_fit: need more rows (" + std::to_string(n) +
                ") than out_dim (" + std::to_string(out_dim) + ")");
  if (!x.data().allFinite()) throw Error("pca_fit: non-finite entries");

  PcaModel m;
  m.mean = x.data().colwise().mean().transpose();
  Eigen::MatrixXd centered = x.data().rowwise() - m.mean.transpose();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();

  m.components.resize(out_dim, d);
  m.eigenvalues.resize(out_dim);
  for (int k = 0; k < out_dim; ++k) {
    Eigen::VectorXd comp = svd.matrixV().col(k);
    // Sign convention: largest-magnitude entry positive.
    Eigen::Index imax;
    comp.cwiseAbs().maxCoeff(&imax);
    if (comp[imax] < 0.0) comp = -comp;
    m.components.row(k) = comp.transpose();
    m.eigenvalues[k] = s[k] * s[k] / (n - 1);
  }
  return m;
}

FeatureMatrix pca_apply(const PcaModel& m, const FeatureMatrix& x) {
  if (x.dim() != m.mean.size())
    throw Error("pca_apply: input dim " + std::to_string(x.dim()) +
                " does not match model dim " + std::to_string(m.mean.size()));
  Eigen::MatrixXd centered = x.data().rowwise() - m.mean.transpose();
  return FeatureMatrix::from_rows(FeatureKind::c3d128, x.ids(),
                                  centered * m.components.transpose());
}

namespace {

void write_doubles(std::ostream& os, const double* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, p + i, 8);
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
  }
}

void read_doubles(std::istream& is, double* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    std::memcpy(p + i, &bits, 8);
  }
}

}  // namespace

void PcaModel::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  json meta;
  meta["in_dim"] = mean.size();
  meta["out_dim"] = components.rows();
  std::ofstream js(dir + "/meta.json");
  if (!js) throw Error("cannot open for writing: " + dir + "/meta.json");
  js << meta.dump(2) << "\n";

  std::ofstream os(dir + "/pca.bin", std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + dir + "/pca.bin");
  write_doubles(os, mean.data(), static_cast<std::size_t>(mean.size()));
  write_doubles(os, eigenvalues.data(), static_cast<std::size_t>(eigenvalues.size()));
  // Row by row to stay independent of Eigen's storage order.
  for (Eigen::Index r = 0; r < components.rows(); ++r) {
    const Eigen::VectorXd row = components.row(r).transpose();
    write_doubles(os, row.data(), static_cast<std::size_t>(row.size()));
  }
  if (!os) throw Error("write failed: " + dir + "/pca.bin");
}

PcaModel PcaModel::load(const std::string& dir) {
  std::ifstream js(dir + "/meta.json");
  if (!js) throw Error("cannot open: " + dir + "/meta.json");
  json meta = json::parse(js);
  const Eigen::Index in_dim = meta.at("in_dim").get<Eigen::Index>();
  const Eigen::Index out_dim = meta.at("out_dim").get<Eigen::Index>();

  std::ifstream is(dir + "/pca.bin", std::ios::binary);
  if (!is) throw Error("cannot open: " + dir + "/pca.bin");
  PcaModel m;
  m.mean.resize(in_dim);
  m.eigenvalues.resize(out_dim);
  m.components.resize(out_dim, in_dim);
  read_doubles(is, m.mean.data(), static_cast<std::size_t>(in_dim));
  read_doubles(is, m.eigenvalues.data(), static_cast<std::size_t>(out_dim));
  for (Eigen::Index r = 0; r < out_dim; ++r) {
    Eigen::VectorXd row(in_dim);
    read_doubles(is, row.data(), static_cast<std::size_t>(in_dim));
    m.components.row(r) = row.transpose();
  }
  if (!is) throw Error("truncated pca model: " + dir + "/pca.bin");
  return m;
}

}  // namespace xview
