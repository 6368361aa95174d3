#include "oib/datasets.hpp"

#include "oib/errors.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>

namespace oib {

namespace {

constexpr std::uint32_t kImagesMagic3 = 0x00000803;
constexpr std::uint32_t kImagesMagic4 = 0x00000804;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");  // transparently reads plain files too
  if (!f) throw IdxError(IdxError::Kind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> buf(1 << 16);
  int got = 0;
  while ((got = gzread(f, buf.data(), static_cast<unsigned>(buf.size()))) > 0)
    out.insert(out.end(), buf.begin(), buf.begin() + got);
  const bool failed = got < 0;
  gzclose(f);
  if (failed) throw IdxError(IdxError::Kind::kIo, "read error in " + path.string());
  return out;
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, size_t off, const std::filesystem::path& p) {
  if (b.size() < off + 4) throw IdxError(IdxError::Kind::kTruncated, p.string() + ": truncated header");
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                         static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(bytes, 4);
}

}  // namespace

int LabeledImageSet::num_classes() const {
  if (labels.empty()) return 0;
  return *std::max_element(labels.begin(), labels.end()) + 1;
}

LabeledImageSet load_idx(const std::filesystem::path& images_path,
                         const std::filesystem::path& labels_path) {
  const auto img = slurp(images_path);
  const auto lab = slurp(labels_path);

  const std::uint32_t img_magic = be32(img, 0, images_path);
  if (img_magic != kImagesMagic3 && img_magic != kImagesMagic4)
    throw IdxError(IdxError::Kind::kBadMagic, images_path.string() + ": bad image magic");
  if (be32(lab, 0, labels_path) != kLabelsMagic)
    throw IdxError(IdxError::Kind::kBadMagic, labels_path.string() + ": bad label magic");

  const std::uint32_t n = be32(img, 4, images_path);
  const std::uint32_t h = be32(img, 8, images_path);
  const std::uint32_t w = be32(img, 12, images_path);
  const std::uint32_t c = img_magic == kImagesMagic4 ? be32(img, 16, images_path) : 1;
  const size_t header = img_magic == kImagesMagic4 ? 20 : 16;
  const std::uint32_t n_labels = be32(lab, 4, labels_path);
  if (n != n_labels)
    throw IdxError(IdxError::Kind::kCountMismatch,
                   "image count " + std::to_string(n) + " != label count " + std::to_string(n_labels));

  const size_t plane = static_cast<size_t>(h) * w;
  const size_t per_image = plane * c;
  if (img.size() < header + per_image * n)
    throw IdxError(IdxError::Kind::kTruncated, images_path.string() + ": truncated pixel data");
  if (lab.size() < 8 + static_cast<size_t>(n))
    throw IdxError(IdxError::Kind::kTruncated, labels_path.string() + ": truncated label data");

  LabeledImageSet set;
  set.height = static_cast<int>(h);
  set.width = static_cast<int>(w);
  set.channels = static_cast<int>(c);
  set.images.values.resize(n, static_cast<Index>(per_image));
  set.labels.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint8_t* src = img.data() + header + i * per_image;
    // IDX stores channels last; rows here are channel-planar.
    for (size_t p = 0; p < plane; ++p)
      for (std::uint32_t ch = 0; ch < c; ++ch)
        set.images.values(i, static_cast<Index>(ch * plane + p)) = src[p * c + ch] / 255.0;
    set.labels[i] = lab[8 + i];
  }
  return set;
}

void write_idx(const LabeledImageSet& set, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lab(labels_path, std::ios::binary);
  if (!img || !lab) throw IdxError(IdxError::Kind::kIo, "cannot write IDX output");
  const auto n = static_cast<std::uint32_t>(set.size());
  const size_t plane = static_cast<size_t>(set.height) * set.width;
  put_be32(img, set.channels == 1 ? kImagesMagic3 : kImagesMagic4);
  put_be32(img, n);
  put_be32(img, static_cast<std::uint32_t>(set.height));
  put_be32(img, static_cast<std::uint32_t>(set.width));
  if (set.channels != 1) put_be32(img, static_cast<std::uint32_t>(set.channels));
  std::vector<char> row(plane * static_cast<size_t>(set.channels));
  for (Index i = 0; i < set.size(); ++i) {
    for (size_t p = 0; p < plane; ++p)
      for (int ch = 0; ch < set.channels; ++ch) {
        const double v = set.images.values(i, static_cast<Index>(ch * plane + p));
        row[p * static_cast<size_t>(set.channels) + static_cast<size_t>(ch)] =
            static_cast<char>(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
      }
    img.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  put_be32(lab, kLabelsMagic);
  put_be32(lab, n);
  for (int y : set.labels) lab.put(static_cast<char>(static_cast<std::uint8_t>(y)));
}

LabeledImageSet subset(const LabeledImageSet& set, Index n, std::uint64_t seed) {
  if (n > set.size()) throw std::invalid_argument("subset: n exceeds dataset size");
  if (n < 0) throw std::invalid_argument("subset: negative n");

  std::map<int, std::vector<Index>> by_class;
  for (Index i = 0; i < set.size(); ++i) by_class[set.labels[static_cast<size_t>(i)]].push_back(i);
  const Index k = static_cast<Index>(by_class.size());

  std::map<int, Index> quota;
  Index assigned = 0;
  Index idx = 0;
  for (const auto& [label, members] : by_class) {
    const Index q = std::min<Index>(n / k + (idx < n % k ? 1 : 0), static_cast<Index>(members.size()));
    quota[label] = q;
    assigned += q;
    ++idx;
  }
  // Hand any shortfall to classes that still have room, in label order.
  while (assigned < n) {
    for (auto& [label, q] : quota) {
      if (assigned == n) break;
      if (q < static_cast<Index>(by_class[label].size())) {
        ++q;
        ++assigned;
      }
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<Index> chosen;
  chosen.reserve(static_cast<size_t>(n));
  for (auto& [label, members] : by_class) {
    std::vector<Index> pool = members;
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(static_cast<size_t>(quota[label]));
    chosen.insert(chosen.end(), pool.begin(), pool.end());
  }
  std::sort(chosen.begin(), chosen.end());

  LabeledImageSet out;
  out.height = set.height;
  out.width = set.width;
  out.channels = set.channels;
  out.images.values.resize(n, set.images.features());
  out.labels.resize(static_cast<size_t>(n));
  for (size_t i = 0; i < chosen.size(); ++i) {
    out.images.values.row(static_cast<Index>(i)) = set.images.values.row(chosen[i]);
    out.labels[i] = set.labels[static_cast<size_t>(chosen[i])];
  }
  return out;
}

std::optional<MnistFiles> find_mnist(const std::filesystem::path& dir) {
  auto pick = [&](const std::string& base) -> std::optional<std::filesystem::path> {
    for (const auto& name : {base, base + ".gz"}) {
      auto p = dir / name;
      if (std::filesystem::exists(p)) return p;
    }
    return std::nullopt;
  };
  auto a = pick("train-images-idx3-ubyte");
  auto b = pick("train-labels-idx1-ubyte");
  auto c = pick("t10k-images-idx3-ubyte");
  auto d = pick("t10k-labels-idx1-ubyte");
  if (!a || !b || !c || !d) return std::nullopt;
  return MnistFiles{*a, *b, *c, *d};
}

Matrix random_joint_covariance(Index n_x, Index n_y, std::uint64_t seed) {
  const Index d = n_x + n_y;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix b(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) b(i, j) = gauss(rng);
  Matrix cov = b * b.transpose() / static_cast<double>(d);
  cov.diagonal().array() += 0.1;
  return symmetrize(cov);
}

CovariancePair covariance_pair_from_joint(const Matrix& joint, Index n_x) {
  const Index n_y = joint.rows() - n_x;
  CovariancePair pair;
  pair.sigma_x = joint.topLeftCorner(n_x, n_x);
  pair.sigma_x_given_y = conditional_covariance(pair.sigma_x, joint.topRightCorner(n_x, n_y),
                                                joint.bottomRightCorner(n_y, n_y), 0.0);
  return pair;
}

Matrix sample_gaussian(const Matrix& cov, Index n, std::uint64_t seed) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("sample_gaussian: covariance not PD");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix g(n, cov.rows());
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < cov.rows(); ++j) g(i, j) = gauss(rng);
  return g * llt.matrixL().transpose();
}

SyntheticGaussianData synth_gaussian(const SyntheticGaussianSpec& spec) {
  if (spec.n_x < 1 || spec.n_y < 0 || spec.samples < 1)
    throw std::invalid_argument("synth_gaussian: need n_x >= 1, n_y >= 0, samples >= 1");
  const Index d = spec.n_x + spec.n_y;
  Matrix joint;
  if (!spec.canonical_correlations.empty()) {
    if (static_cast<Index>(spec.canonical_correlations.size()) > std::min(spec.n_x, spec.n_y))
      throw std::invalid_argument("synth_gaussian: more canonical correlations than min(n_x, n_y)");
    joint = Matrix::Identity(d, d);
    for (size_t i = 0; i < spec.canonical_correlations.size(); ++i) {
      const double c = spec.canonical_correlations[i];
      if (!(std::abs(c) < 1.0)) throw std::invalid_argument("synth_gaussian: |corr| must be < 1");
      joint(static_cast<Index>(i), spec.n_x + static_cast<Index>(i)) = c;
      joint(spec.n_x + static_cast<Index>(i), static_cast<Index>(i)) = c;
    }
  } else {
    joint = random_joint_covariance(spec.n_x, spec.n_y, spec.seed);
  }

  SyntheticGaussianData out;
  out.joint_covariance = joint;
  out.sigma_xy = joint.topRightCorner(spec.n_x, spec.n_y);
  out.sigma_y = joint.bottomRightCorner(spec.n_y, spec.n_y);
  out.true_cov = covariance_pair_from_joint(joint, spec.n_x);

  const Matrix samples = sample_gaussian(joint, spec.samples, spec.seed + 1);
  out.x = DataMatrix(samples.leftCols(spec.n_x));
  out.y = DataMatrix(samples.rightCols(spec.n_y));

  // The CCA subspace of size k carries -1/2 sum_{i<=k} log lambda_i.
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(out.true_cov.sigma_x_given_y, out.true_cov.sigma_x);
  Vector lam = ges.eigenvalues();
  std::sort(lam.data(), lam.data() + lam.size());
  double acc = 0.0;
  for (Index i = 0; i < lam.size(); ++i) {
    acc += -0.5 * std::log(std::max(lam(i), 1e-300));
    out.true_mi_curve.push_back(acc);
  }
  return out;
}

std::pair<LabeledImageSet, LabeledImageSet> synth_images(const SyntheticImageSpec& spec) {
  if (spec.height < 1 || spec.width < 1 || spec.classes < 2 || spec.train < 1 || spec.test < 1)
    throw std::invalid_argument("synth_images: invalid spec");
  const Index d = static_cast<Index>(spec.height) * spec.width;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, spec.noise);
  Matrix prototypes(spec.classes, d);
  for (Index c = 0; c < prototypes.rows(); ++c)
    for (Index j = 0; j < d; ++j) prototypes(c, j) = unit(rng);

  auto draw = [&](Index n) {
    LabeledImageSet set;
    set.height = spec.height;
    set.width = spec.width;
    set.images.values.resize(n, d);
    set.labels.resize(static_cast<size_t>(n));
    for (Index i = 0; i < n; ++i) {
      const int label = static_cast<int>(i % spec.classes);
      set.labels[static_cast<size_t>(i)] = label;
      for (Index j = 0; j < d; ++j)
        set.images.values(i, j) = std::clamp(prototypes(label, j) + gauss(rng), 0.0, 1.0);
    }
    return set;
  };
  LabeledImageSet train = draw(spec.train);
  LabeledImageSet test = draw(spec.test);
  return {std::move(train), std::move(test)};
}

}  // namespace oib
