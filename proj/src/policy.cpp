#include "factr/policy.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace factr::policy {

void ModelConfig::validate() const {
  if (image_h < 16 || image_w < 16) raise(ErrorKind::config, "image must be at least 16x16");
  if (image_h % patch != 0 || image_w % patch != 0) {
    raise(ErrorKind::invalid_argument, "image size not divisible by patch size");
  }
  if (d_model % heads != 0) raise(ErrorKind::config, "d_model must be divisible by heads");
  if (chunk < 1) raise(ErrorKind::config, "chunk must be >= 1");
  if (n_joints < 1 || action_dim < 1) raise(ErrorKind::config, "dimensions must be positive");
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) raise(ErrorKind::config, "learning rate must be positive");
  if (batch_size < 1) raise(ErrorKind::config, "batch size must be >= 1");
  if (total_steps < 1) raise(ErrorKind::config, "total steps must be >= 1");
  if (warmup_steps < 0 || warmup_steps > total_steps) raise(ErrorKind::config, "bad warmup");
}

namespace {

Mat sincos_table(int rows, int d) {
  Mat pe(rows, d);
  for (int p = 0; p < rows; ++p) {
    for (int i = 0; i < d / 2; ++i) {
      const double omega = std::pow(10000.0, -2.0 * i / d);
      pe(p, 2 * i) = std::sin(p * omega);
      pe(p, 2 * i + 1) = std::cos(p * omega);
    }
  }
  return pe;
}

Mat patchify(const curriculum::Image& img, const ModelConfig& cfg) {
  if (img.h != cfg.image_h || img.w != cfg.image_w || img.c != cfg.channels) {
    raise(ErrorKind::invalid_argument, "image shape does not match the model configuration");
  }
  const int p = cfg.patch;
  const int ny = img.h / p, nx = img.w / p;
  Mat out(ny * nx, cfg.patch_dim());
  for (int py = 0; py < ny; ++py) {
    for (int px = 0; px < nx; ++px) {
      int col = 0;
      for (int y = 0; y < p; ++y)
        for (int x = 0; x < p; ++x)
          for (int c = 0; c < img.c; ++c)
            out(py * nx + px, col++) = img.at(py * p + y, px * p + x, c);
    }
  }
  return out;
}

// Token-axis blur as an explicit matrix so gradients flow into the patch
// embedding, mirroring the non-differentiable pixel-space path.
Mat blur_matrix(int tokens, double sigma) {
  const auto k = curriculum::gaussian_kernel_1d(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  Mat b = Mat::Zero(tokens, tokens);
  for (int t = 0; t < tokens; ++t) {
    for (int o = -radius; o <= radius; ++o) {
      const int src = std::clamp(t + o, 0, tokens - 1);
      b(t, src) += k[static_cast<std::size_t>(o + radius)];
    }
  }
  return b;
}

struct AttnIds {
  int wq, bq, wk, bk, wv, bv, wo, bo;
};

}  // namespace

int Net::find(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return static_cast<int>(i);
  }
  raise(ErrorKind::invalid_argument, "unknown parameter " + name);
}

Net::Net(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const int d = cfg_.d_model;
  const int ffd = cfg_.ff_mult * d;

  auto weight = [&](const std::string& name, int rows, int cols) {
    const double std = std::sqrt(2.0 / (rows + cols));
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = rng.normal(0.0, std);
    params_.push_back(Param{name, std::move(m), {}, {}, {}, true});
  };
  auto embedding = [&](const std::string& name, int rows, int cols, double std) {
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = rng.normal(0.0, std);
    params_.push_back(Param{name, std::move(m), {}, {}, {}, true});
  };
  auto bias = [&](const std::string& name, int cols, double fill = 0.0) {
    params_.push_back(Param{name, Mat::Constant(1, cols, fill), {}, {}, {}, false});
  };
  auto norm = [&](const std::string& prefix) {
    bias(prefix + ".g", d, 1.0);
    bias(prefix + ".b", d, 0.0);
  };
  auto attention = [&](const std::string& prefix) {
    for (const char* part : {"wq", "wk", "wv", "wo"}) weight(prefix + "." + part, d, d);
    for (const char* part : {"bq", "bk", "bv", "bo"}) bias(prefix + "." + part, d);
  };
  auto feed_forward = [&](const std::string& prefix) {
    weight(prefix + ".w1", d, ffd);
    bias(prefix + ".b1", ffd);
    weight(prefix + ".w2", ffd, d);
    bias(prefix + ".b2", d);
  };

  weight("patch.w", cfg_.patch_dim(), d);
  bias("patch.b", d);
  if (cfg_.learned_pos) {
    embedding("pos", cfg_.tokens(), d, 0.02);
  } else {
    pos_encoding_ = sincos_table(cfg_.tokens(), d);
  }
  weight("force.w1", cfg_.n_joints, cfg_.force_hidden);
  bias("force.b1", cfg_.force_hidden);
  weight("force.w2", cfg_.force_hidden, d);
  bias("force.b2", d);

  for (int l = 0; l < cfg_.enc_layers; ++l) {
    const std::string p = "enc" + std::to_string(l);
    norm(p + ".ln1");
    attention(p + ".attn");
    norm(p + ".ln2");
    feed_forward(p + ".ff");
  }
  norm("enc_out_ln");

  embedding("actions", cfg_.chunk, d, 1.0);
  for (int l = 0; l < cfg_.dec_layers; ++l) {
    const std::string p = "dec" + std::to_string(l);
    norm(p + ".ln_sa");
    attention(p + ".sa");
    norm(p + ".ln_ca");
    attention(p + ".ca");
    norm(p + ".ln_ff");
    feed_forward(p + ".ff");
  }
  norm("dec_out_ln");

  weight("head.w1", d, d);
  bias("head.b1", d);
  weight("head.w2", d, cfg_.action_dim);
  bias("head.b2", cfg_.action_dim);

  for (auto& p : params_) {
    p.grad = Mat::Zero(p.value.rows(), p.value.cols());
    p.adam_m = Mat::Zero(p.value.rows(), p.value.cols());
    p.adam_v = Mat::Zero(p.value.rows(), p.value.cols());
  }
}

std::uint64_t Net::parameter_count() const {
  std::uint64_t n = 0;
  for (const auto& p : params_) n += static_cast<std::uint64_t>(p.value.size());
  return n;
}

Net::ForwardResult Net::forward(Tape& tape, const curriculum::Image& image, const Vec& tau_ext,
                                const LatentOp* latent_op) const {
  if (tau_ext.size() != cfg_.n_joints) {
    raise(ErrorKind::invalid_argument, "force reading length does not match n_joints");
  }
  ForwardResult out;
  out.param_ids.reserve(params_.size());
  for (const auto& p : params_) out.param_ids.push_back(tape.leaf(p.value));

  std::unordered_map<std::string, int> id;
  id.reserve(params_.size() * 2);
  for (std::size_t i = 0; i < params_.size(); ++i) id[params_[i].name] = out.param_ids[i];
  auto P = [&](const std::string& name) {
    const auto it = id.find(name);
    if (it == id.end()) raise(ErrorKind::invalid_argument, "unknown parameter " + name);
    return it->second;
  };

  auto check = [&](int node, const std::string& where) {
    if (!tape.val(node).allFinite()) raise(ErrorKind::numeric, "non-finite activations at " + where);
    return node;
  };

  const int heads = cfg_.heads;
  const int dh = cfg_.d_model / heads;

  // probs_avg, when non-null, receives the heads-averaged attention matrix.
  auto mhsa = [&](int xq, int xkv, const AttnIds& a, Mat* probs_avg) {
    const int q = tape.add_rowvec(tape.matmul(xq, a.wq), a.bq);
    const int k = tape.add_rowvec(tape.matmul(xkv, a.wk), a.bk);
    const int v = tape.add_rowvec(tape.matmul(xkv, a.wv), a.bv);
    std::vector<int> mixed;
    if (probs_avg != nullptr) *probs_avg = Mat::Zero(tape.val(xq).rows(), tape.val(xkv).rows());
    for (int h = 0; h < heads; ++h) {
      const int qh = tape.slice_cols(q, h * dh, dh);
      const int kh = tape.slice_cols(k, h * dh, dh);
      const int vh = tape.slice_cols(v, h * dh, dh);
      const int scores = tape.scale(tape.matmul(qh, kh, false, true), 1.0 / std::sqrt(dh));
      const int probs = tape.softmax_rows(scores);
      if (probs_avg != nullptr) *probs_avg += tape.val(probs) / heads;
      mixed.push_back(tape.matmul(probs, vh));
    }
    return tape.add_rowvec(tape.matmul(tape.concat_cols(mixed), a.wo), a.bo);
  };
  auto attn_ids = [&](const std::string& p) {
    return AttnIds{P(p + ".wq"), P(p + ".bq"), P(p + ".wk"), P(p + ".bk"),
                   P(p + ".wv"), P(p + ".bv"), P(p + ".wo"), P(p + ".bo")};
  };
  auto ff = [&](int x, const std::string& p) {
    const int h = tape.gelu(tape.add_rowvec(tape.matmul(x, P(p + ".w1")), P(p + ".b1")));
    return tape.add_rowvec(tape.matmul(h, P(p + ".w2")), P(p + ".b2"));
  };
  auto ln = [&](int x, const std::string& p) { return tape.layer_norm(x, P(p + ".g"), P(p + ".b")); };

  // Vision tokens: patchify, embed, add positions.
  const int patches = tape.leaf(patchify(image, cfg_));
  int zv = tape.add_rowvec(tape.matmul(patches, P("patch.w")), P("patch.b"));
  zv = cfg_.learned_pos ? tape.add(zv, P("pos")) : tape.add(zv, tape.leaf(pos_encoding_));

  if (latent_op != nullptr) {
    if (latent_op->op == curriculum::OperatorType::gaussian_blur) {
      if (latent_op->sigma >= curriculum::kIdentitySigma) {
        zv = tape.matmul(tape.leaf(blur_matrix(cfg_.tokens(), latent_op->sigma)), zv);
      }
    } else {
      const int pool = curriculum::pool_size_for(latent_op->sigma);
      if (pool > 1) zv = tape.maxpool_rows(zv, pool);
    }
  }

  // Force token: fixed input scaling, two-layer MLP. Vision-only mode feeds a
  // constant zero reading so the architecture is unchanged.
  Mat tau_in(1, cfg_.n_joints);
  if (cfg_.vision_only) {
    tau_in.setZero();
  } else {
    for (int i = 0; i < cfg_.n_joints; ++i) tau_in(0, i) = cfg_.force_scale * tau_ext[i];
  }
  const int f_h = tape.gelu(tape.add_rowvec(tape.matmul(tape.leaf(tau_in), P("force.w1")), P("force.b1")));
  const int zf = tape.add_rowvec(tape.matmul(f_h, P("force.w2")), P("force.b2"));

  int x = tape.concat_rows({zv, zf});
  for (int l = 0; l < cfg_.enc_layers; ++l) {
    const std::string p = "enc" + std::to_string(l);
    const int normed = ln(x, p + ".ln1");
    x = tape.add(x, mhsa(normed, normed, attn_ids(p + ".attn"), nullptr));
    x = tape.add(x, ff(ln(x, p + ".ln2"), p + ".ff"));
    check(x, "encoder layer " + std::to_string(l));
  }
  const int memory = ln(x, "enc_out_ln");

  const int n_tokens = cfg_.tokens();
  int dec = P("actions");
  for (int l = 0; l < cfg_.dec_layers; ++l) {
    const std::string p = "dec" + std::to_string(l);
    const int sa_in = ln(dec, p + ".ln_sa");
    dec = tape.add(dec, mhsa(sa_in, sa_in, attn_ids(p + ".sa"), nullptr));
    Mat probs;
    dec = tape.add(dec, mhsa(ln(dec, p + ".ln_ca"), memory, attn_ids(p + ".ca"), &probs));
    dec = tape.add(dec, ff(ln(dec, p + ".ln_ff"), p + ".ff"));
    check(dec, "decoder layer " + std::to_string(l));

    if (cfg_.split_softmax_trace) {
      // Literal per-modality softmax: each part normalizes to one on its own,
      // which is exactly what this mode is meant to expose.
      out.trace.vision_mass.push_back(Vec::Ones(cfg_.chunk));
      out.trace.force_mass.push_back(Vec::Ones(cfg_.chunk));
    } else {
      Vec vm(cfg_.chunk), fm(cfg_.chunk);
      for (int a = 0; a < cfg_.chunk; ++a) {
        vm[a] = probs.row(a).head(n_tokens).sum();
        fm[a] = probs(a, n_tokens);
      }
      out.trace.vision_mass.push_back(vm);
      out.trace.force_mass.push_back(fm);
    }
  }
  const int dec_out = ln(dec, "dec_out_ln");

  const int head_h = tape.gelu(tape.add_rowvec(tape.matmul(dec_out, P("head.w1")), P("head.b1")));
  out.pred = check(tape.add_rowvec(tape.matmul(head_h, P("head.w2")), P("head.b2")), "output head");
  return out;
}

Mat Net::predict(const curriculum::Image& image, const Vec& tau_ext, AttentionTrace* trace) const {
  Tape tape;
  const auto fwd = forward(tape, image, tau_ext);
  if (trace != nullptr) *trace = fwd.trace;
  return tape.val(fwd.pred);
}

void Net::zero_grads() {
  for (auto& p : params_) p.grad.setZero();
}

void Net::accumulate_grads(const Tape& tape, const ForwardResult& fwd, double scale) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Mat& g = tape.grad(fwd.param_ids[i]);
    if (g.size() > 0) params_[i].grad += scale * g;
  }
}

double Net::adamw_step(AdamState& state, const TrainConfig& tc) {
  state.step += 1;
  const long t = state.step;
  double lr = tc.lr;
  if (t <= tc.warmup_steps) {
    lr = tc.lr * static_cast<double>(t) / std::max<long>(1, tc.warmup_steps);
  } else {
    const double progress =
        static_cast<double>(t - tc.warmup_steps) / std::max<long>(1, tc.total_steps - tc.warmup_steps);
    lr = tc.lr * 0.5 * (1.0 + std::cos(M_PI * std::min(1.0, progress)));
  }
  const double bc1 = 1.0 - std::pow(tc.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(tc.beta2, static_cast<double>(t));
  constexpr double eps = 1e-8;
  for (auto& p : params_) {
    p.adam_m = tc.beta1 * p.adam_m + (1.0 - tc.beta1) * p.grad;
    p.adam_v = tc.beta2 * p.adam_v + (1.0 - tc.beta2) * p.grad.cwiseProduct(p.grad);
    const Mat mhat = p.adam_m / bc1;
    const Mat vhat = p.adam_v / bc2;
    p.value -= lr * (mhat.array() / (vhat.array().sqrt() + eps)).matrix();
    if (p.decay && tc.weight_decay > 0.0) p.value -= lr * tc.weight_decay * p.value;
  }
  return lr;
}

double bc_loss(const Mat& pred, const Mat& labels) {
  if (pred.rows() != labels.rows() || pred.cols() != labels.cols()) {
    raise(ErrorKind::invalid_argument, "prediction/label shape mismatch");
  }
  return (pred - labels).squaredNorm() / static_cast<double>(pred.size());
}

Mat label_chunk(const EpisodeRecord& ep, std::size_t t, int k) {
  if (ep.targets.empty()) raise(ErrorKind::invalid_argument, "episode has no targets");
  const int d = static_cast<int>(ep.targets.front().size());
  Mat labels(k, d);
  for (int i = 0; i < k; ++i) {
    const std::size_t idx = std::min(t + static_cast<std::size_t>(i), ep.targets.size() - 1);
    labels.row(i) = ep.targets[idx].transpose();
  }
  return labels;
}

// ---- checkpoint io ----------------------------------------------------

namespace {

constexpr char kMagic[4] = {'F', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    raise(ErrorKind::io, std::string("checkpoint truncated while reading ") + what);
  }
  return v;
}

}  // namespace

void save_checkpoint(const Net& net, const std::string& path, std::uint64_t config_hash) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) raise(ErrorKind::io, "cannot open checkpoint for writing: " + path);
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kVersion);
  put<std::uint64_t>(os, config_hash);
  const auto& c = net.cfg_;
  for (int v : {c.image_h, c.image_w, c.channels, c.patch, c.n_joints, c.action_dim, c.d_model,
                c.heads, c.enc_layers, c.dec_layers, c.ff_mult, c.chunk, c.force_hidden,
                static_cast<int>(c.learned_pos), static_cast<int>(c.vision_only)}) {
    put<std::int32_t>(os, v);
  }
  put<double>(os, c.force_scale);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(net.params_.size()));
  for (const auto& p : net.params_) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.value.rows()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.value.cols()));
    for (int r = 0; r < p.value.rows(); ++r)
      for (int col = 0; col < p.value.cols(); ++col) put<float>(os, static_cast<float>(p.value(r, col)));
  }
  if (!os) raise(ErrorKind::io, "short write to checkpoint: " + path);
}

Net load_checkpoint(const std::string& path, std::uint64_t* config_hash_out) {
  std::ifstream is(path, std::ios::binary);
  if (!is) raise(ErrorKind::io, "cannot open checkpoint: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    raise(ErrorKind::io, "bad checkpoint magic");
  }
  const auto version = get<std::uint32_t>(is, "version");
  if (version != kVersion) raise(ErrorKind::io, "unsupported checkpoint version");
  const auto hash = get<std::uint64_t>(is, "config hash");
  if (config_hash_out != nullptr) *config_hash_out = hash;

  ModelConfig c;
  c.image_h = get<std::int32_t>(is, "image_h");
  c.image_w = get<std::int32_t>(is, "image_w");
  c.channels = get<std::int32_t>(is, "channels");
  c.patch = get<std::int32_t>(is, "patch");
  c.n_joints = get<std::int32_t>(is, "n_joints");
  c.action_dim = get<std::int32_t>(is, "action_dim");
  c.d_model = get<std::int32_t>(is, "d_model");
  c.heads = get<std::int32_t>(is, "heads");
  c.enc_layers = get<std::int32_t>(is, "enc_layers");
  c.dec_layers = get<std::int32_t>(is, "dec_layers");
  c.ff_mult = get<std::int32_t>(is, "ff_mult");
  c.chunk = get<std::int32_t>(is, "chunk");
  c.force_hidden = get<std::int32_t>(is, "force_hidden");
  c.learned_pos = get<std::int32_t>(is, "learned_pos") != 0;
  c.vision_only = get<std::int32_t>(is, "vision_only") != 0;
  c.force_scale = get<double>(is, "force_scale");

  Net net(c, 0);
  const auto count = get<std::uint32_t>(is, "tensor count");
  if (count != net.params_.size()) raise(ErrorKind::io, "checkpoint tensor count mismatch");
  for (auto& p : net.params_) {
    const auto name_len = get<std::uint32_t>(is, "tensor name length");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) raise(ErrorKind::io, "checkpoint truncated while reading tensor name");
    if (name != p.name) raise(ErrorKind::io, "checkpoint tensor order mismatch at " + name);
    const auto rows = get<std::uint32_t>(is, "tensor rows");
    const auto cols = get<std::uint32_t>(is, "tensor cols");
    if (rows != static_cast<std::uint32_t>(p.value.rows()) ||
        cols != static_cast<std::uint32_t>(p.value.cols())) {
      raise(ErrorKind::io, "checkpoint tensor shape mismatch at " + name);
    }
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t col = 0; col < cols; ++col)
        p.value(static_cast<int>(r), static_cast<int>(col)) = get<float>(is, "tensor data");
  }
  return net;
}

std::string inspect_checkpoint(const std::string& path) {
  std::uint64_t hash = 0;
  const Net net = load_checkpoint(path, &hash);
  std::ostringstream os;
  const auto& c = net.config();
  os << "checkpoint: " << path << "\n";
  os << "version: " << kVersion << "\n";
  os << "config_hash: " << hash << "\n";
  os << "image: " << c.image_h << "x" << c.image_w << "x" << c.channels << " patch " << c.patch << "\n";
  os << "model: d=" << c.d_model << " heads=" << c.heads << " enc=" << c.enc_layers
     << " dec=" << c.dec_layers << " chunk=" << c.chunk << " action_dim=" << c.action_dim << "\n";
  os << "vision_only: " << (c.vision_only ? 1 : 0) << "\n";
  os << "tensors: " << net.params().size() << " parameters: " << net.parameter_count() << "\n";
  return os.str();
}

}  // namespace factr::policy
