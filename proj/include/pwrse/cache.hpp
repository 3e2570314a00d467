#pragma once
#include "pwrse/constants.hpp"
#include "pwrse/dirac.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace pwrse::cache {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a64_bytes(const void *p, std::size_t n,
                                   std::uint64_t h = 1469598103934665603ull) {
  const auto *b = static_cast<const unsigned char *>(p);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 1099511628211ull;
  }
  return h;
}

// Canonical parameter string; any change to it changes the file key.
inline std::string key_string(double Z, const spectrum::GridSpec &g,
                              std::vector<int> kappas) {
  std::sort(kappas.begin(), kappas.end());
  kappas.erase(std::unique(kappas.begin(), kappas.end()), kappas.end());
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "specc-v1|Z=%.17g|N=%d|k=%d|R=%.17g|scheme=%s|gamma=%.17g|"
                "small=k+1|const=",
                Z, g.N, g.k, g.R, basis::scheme_name(g.scheme).c_str(),
                g.gamma);
  std::string key = buf;
  key += consts::constants_version;
  key += "|kap=";
  for (std::size_t i = 0; i < kappas.size(); ++i) {
    if (i)
      key += ',';
    key += std::to_string(kappas[i]);
  }
  return key;
}

inline std::string file_name(const std::string &key) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "spec-%016llx.bin",
                (unsigned long long)fnv1a64(key));
  return buf;
}

namespace detail {

inline constexpr char magic[8] = {'P', 'W', 'S', 'P', 'E', 'C', 'C', '1'};

template <class T> void put(std::string &out, const T &v) {
  out.append(reinterpret_cast<const char *>(&v), sizeof v);
}

template <class T> bool get(const std::string &in, std::size_t &pos, T &v) {
  if (pos + sizeof v > in.size())
    return false;
  std::memcpy(&v, in.data() + pos, sizeof v);
  pos += sizeof v;
  return true;
}

} // namespace detail

// Serialized layout (native endianness; the cache is machine-local):
//   magic, u32 keylen, key bytes, i32 nG, i32 nF, i32 nkap,
//   then per channel: i32 kappa, i32 dim, E[dim], CG[nG*dim], CF[nF*dim],
//   trailing u64 hash of everything before it.
inline bool store(const std::filesystem::path &path,
                  const spectrum::SpectrumSet &S, const std::string &key) {
  std::string out;
  out.append(detail::magic, sizeof detail::magic);
  detail::put(out, std::uint32_t(key.size()));
  out += key;
  detail::put(out, std::int32_t(S.nG));
  detail::put(out, std::int32_t(S.nF));
  detail::put(out, std::int32_t(S.channels.size()));
  for (const auto &[kappa, ch] : S.channels) {
    detail::put(out, std::int32_t(kappa));
    detail::put(out, std::int32_t(ch.E.size()));
    out.append(reinterpret_cast<const char *>(ch.E.data()),
               sizeof(double) * ch.E.size());
    out.append(reinterpret_cast<const char *>(ch.CG.data()),
               sizeof(double) * ch.CG.size());
    out.append(reinterpret_cast<const char *>(ch.CF.data()),
               sizeof(double) * ch.CF.size());
  }
  detail::put(out, fnv1a64_bytes(out.data(), out.size()));

  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f)
      return false;
    f.write(out.data(), std::streamsize(out.size()));
    if (!f)
      return false;
  }
  std::filesystem::rename(tmp, path, ec);
  return !ec;
}

// Fills channels of a prepared set from file.  Returns false on any mismatch
// or corruption; the caller then recomputes and overwrites.
inline bool load(const std::filesystem::path &path, spectrum::SpectrumSet &S,
                 const std::string &key,
                 const std::vector<int> &kappas_wanted) {
  std::ifstream f(path, std::ios::binary);
  if (!f)
    return false;
  std::string in((std::istreambuf_iterator<char>(f)),
                 std::istreambuf_iterator<char>());
  if (in.size() < sizeof(detail::magic) + 16)
    return false;
  if (std::memcmp(in.data(), detail::magic, sizeof detail::magic) != 0)
    return false;

  std::uint64_t want_hash;
  std::memcpy(&want_hash, in.data() + in.size() - 8, 8);
  if (fnv1a64_bytes(in.data(), in.size() - 8) != want_hash)
    return false;

  std::size_t pos = sizeof(detail::magic);
  std::uint32_t keylen;
  if (!detail::get(in, pos, keylen) || pos + keylen > in.size())
    return false;
  if (std::string_view(in.data() + pos, keylen) != key)
    return false;
  pos += keylen;

  std::int32_t nG, nF, nkap;
  if (!detail::get(in, pos, nG) || !detail::get(in, pos, nF) ||
      !detail::get(in, pos, nkap))
    return false;
  if (nG != S.nG || nF != S.nF || nkap <= 0)
    return false;

  std::map<int, spectrum::Channel> chans;
  for (int i = 0; i < nkap; ++i) {
    std::int32_t kappa, dim;
    if (!detail::get(in, pos, kappa) || !detail::get(in, pos, dim))
      return false;
    if (dim != S.nG + S.nF)
      return false;
    spectrum::Channel ch;
    ch.kappa = kappa;
    ch.E.resize(dim);
    ch.CG.resize(S.nG, dim);
    ch.CF.resize(S.nF, dim);
    const std::size_t need =
        sizeof(double) * (std::size_t(dim) + std::size_t(S.nG) * dim +
                          std::size_t(S.nF) * dim);
    if (pos + need > in.size())
      return false;
    std::memcpy(ch.E.data(), in.data() + pos, sizeof(double) * dim);
    pos += sizeof(double) * dim;
    std::memcpy(ch.CG.data(), in.data() + pos,
                sizeof(double) * std::size_t(S.nG) * dim);
    pos += sizeof(double) * std::size_t(S.nG) * dim;
    std::memcpy(ch.CF.data(), in.data() + pos,
                sizeof(double) * std::size_t(S.nF) * dim);
    pos += sizeof(double) * std::size_t(S.nF) * dim;
    chans.emplace(kappa, std::move(ch));
  }
  for (int kappa : kappas_wanted)
    if (!chans.count(kappa))
      return false;
  for (auto &[kappa, ch] : chans)
    spectrum::detail::check_channel(S.Z, kappa, ch.E);
  S.channels = std::move(chans);
  return true;
}

// Entry point used by the pipeline.  Empty cache_dir disables caching.
inline spectrum::SpectrumSet solve_or_load(const std::string &cache_dir,
                                           double Z,
                                           const spectrum::GridSpec &g,
                                           const std::vector<int> &kappas) {
  if (cache_dir.empty())
    return spectrum::solve_spectrum(Z, g, kappas);
  const std::string key = key_string(Z, g, kappas);
  const auto path = std::filesystem::path(cache_dir) / file_name(key);
  spectrum::SpectrumSet S = spectrum::prepare_set(Z, g);
  if (load(path, S, key, kappas))
    return S;
  spectrum::solve_channels(S, kappas);
  store(path, S, key);
  return S;
}

} // namespace pwrse::cache
