#include "vas/frame_sampler.hpp"

#include <fcntl.h>
#include <spawn.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <regex>
#include <sstream>

#include <jpeglib.h>
#include <spdlog/spdlog.h>

#include "vas/prompts.hpp"

extern char** environ;

namespace vas {

ZoomSchedule ZoomSchedule::defaults() {
  ZoomSchedule s;
  s.levels[1] = LevelSampling{30, Resolution{1204, 672}};
  s.levels[2] = LevelSampling{20, Resolution{1332, 748}};
  s.levels[3] = LevelSampling{10, Resolution{1462, 824}};
  s.caption_pass = LevelSampling{8, Resolution{796, 448}};
  return s;
}

void ZoomSchedule::validate() const {
  if (levels.empty()) throw Error(ErrorKind::Config, "zoom schedule has no levels");
  const LevelSampling* prev = nullptr;
  for (const auto& [level, s] : levels) {
    if (s.frame_count < 1 || s.resolution.width < 1 || s.resolution.height < 1) {
      throw Error(ErrorKind::Config, "zoom level " + std::to_string(level) + " is empty");
    }
    if (prev && !(s.frame_count < prev->frame_count && s.resolution.area() > prev->resolution.area())) {
      throw Error(ErrorKind::Config, "zoom schedule must trade frames for resolution at level " +
                                         std::to_string(level));
    }
    prev = &s;
  }
}

const LevelSampling& ZoomSchedule::at(int level) const {
  const auto it = levels.find(level);
  if (it == levels.end()) {
    throw Error(ErrorKind::Config, "no zoom schedule entry for level " + std::to_string(level));
  }
  return it->second;
}

SamplingPlan plan_window(const TemporalWindow& window, const LevelSampling& sampling,
                         double native_fps) {
  int n = sampling.frame_count;
  if (native_fps > 0.0) {
    const auto cap = static_cast<int>(std::floor(window.duration() * native_fps));
    n = std::min(n, std::max(cap, 1));
  }
  if (n < 1) throw Error(ErrorKind::InvalidInput, "sampling plan needs at least one frame");
  SamplingPlan p;
  p.frame_count = n;
  p.resolution = sampling.resolution;
  p.timestamps.reserve(static_cast<std::size_t>(n));
  const double step = window.duration() / n;
  for (int k = 0; k < n; ++k) p.timestamps.push_back(window.start_s + (k + 0.5) * step);
  return p;
}

SamplingPlan plan(const ClipRef& clip, const ZoomSchedule& schedule, double native_fps) {
  return plan_window(clip.window, schedule.at(clip.level), native_fps);
}

bool is_simulated(const VideoRef& video) { return video.source_uri.rfind(kSimScheme, 0) == 0; }

std::vector<EncodedFrame> NullFrameSource::extract(const VideoRef& video, const SamplingPlan& plan) {
  if (plan.timestamps.empty()) throw Error(ErrorKind::InvalidInput, "plan has no frames");
  std::vector<EncodedFrame> frames;
  frames.reserve(plan.timestamps.size());
  for (double t : plan.timestamps) {
    frames.push_back(
        EncodedFrame{"null", plan.resolution.width, plan.resolution.height, t, video.source_uri});
  }
  return frames;
}

std::string letterbox_filter(int width, int height) {
  std::ostringstream os;
  os << "scale=" << width << ':' << height << ":force_original_aspect_ratio=decrease,pad="
     << width << ':' << height << ":(ow-iw)/2:(oh-ih)/2";
  return os.str();
}

std::string find_executable(const std::string& name) {
  if (name.find('/') != std::string::npos) {
    return ::access(name.c_str(), X_OK) == 0 ? name : std::string{};
  }
  const char* path = std::getenv("PATH");
  if (path == nullptr) return {};
  std::stringstream ss(path);
  std::string dir;
  while (std::getline(ss, dir, ':')) {
    if (dir.empty()) continue;
    const auto candidate = dir + "/" + name;
    struct stat st {};
    if (::stat(candidate.c_str(), &st) == 0 && S_ISREG(st.st_mode) &&
        ::access(candidate.c_str(), X_OK) == 0) {
      return candidate;
    }
  }
  return {};
}

ProcessOutput run_process(const std::vector<std::string>& argv, bool merge_stderr) {
  if (argv.empty()) throw Error(ErrorKind::InvalidInput, "empty command line");
  int fds[2];
  if (::pipe(fds) != 0) throw Error(ErrorKind::Environment, "pipe() failed");

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, fds[0]);
  if (merge_stderr) {
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDERR_FILENO);
  } else {
    posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, "/dev/null", O_WRONLY, 0);
  }

  std::vector<char*> args;
  args.reserve(argv.size() + 1);
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  pid_t pid = 0;
  const int rc = ::posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(fds[1]);
  if (rc != 0) {
    ::close(fds[0]);
    throw Error(ErrorKind::Environment,
                "cannot start '" + argv[0] + "': " + std::strerror(rc));
  }

  ProcessOutput out;
  char buf[1 << 16];
  for (;;) {
    const ssize_t n = ::read(fds[0], buf, sizeof buf);
    if (n > 0) out.out.append(buf, static_cast<std::size_t>(n));
    else if (n == 0 || errno != EINTR) break;
  }
  ::close(fds[0]);
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  out.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return out;
}

RgbImage parse_ppm(std::string_view data) {
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    for (;;) {
      while (pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
      if (pos < data.size() && data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    const auto start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    return std::string(data.substr(start, pos - start));
  };
  if (next_token() != "P6") throw Error(ErrorKind::Extraction, "decoder output is not a P6 PPM");
  RgbImage img;
  try {
    img.width = std::stoi(next_token());
    img.height = std::stoi(next_token());
    if (std::stoi(next_token()) != 255) throw Error(ErrorKind::Extraction, "PPM maxval must be 255");
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::Extraction, "malformed PPM header");
  }
  ++pos;  // single whitespace after maxval
  const auto bytes = static_cast<std::size_t>(img.width) * img.height * 3;
  if (img.width <= 0 || img.height <= 0 || data.size() < pos + bytes) {
    throw Error(ErrorKind::Extraction, "truncated PPM data");
  }
  img.pixels.assign(data.begin() + static_cast<long>(pos),
                    data.begin() + static_cast<long>(pos + bytes));
  return img;
}

namespace {

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(err->jump, 1);
}

}  // namespace

std::string encode_jpeg(const RgbImage& image, int quality) {
  jpeg_compress_struct cinfo{};
  JpegErrorMgr err{};
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::free(buffer);
    throw Error(ErrorKind::Extraction, "JPEG encoding failed");
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buffer, &size);
  cinfo.image_width = static_cast<JDIMENSION>(image.width);
  cinfo.image_height = static_cast<JDIMENSION>(image.height);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  const auto stride = static_cast<std::size_t>(image.width) * 3;
  while (cinfo.next_scanline < cinfo.image_height) {
    auto* row = const_cast<unsigned char*>(image.pixels.data() + cinfo.next_scanline * stride);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::string out(reinterpret_cast<const char*>(buffer), size);
  std::free(buffer);
  return out;
}

RgbImage decode_jpeg(std::string_view data) {
  jpeg_decompress_struct cinfo{};
  JpegErrorMgr err{};
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorKind::Extraction, "JPEG decoding failed");
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, reinterpret_cast<const unsigned char*>(data.data()),
               static_cast<unsigned long>(data.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  RgbImage img;
  img.width = static_cast<int>(cinfo.output_width);
  img.height = static_cast<int>(cinfo.output_height);
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  const auto stride = static_cast<std::size_t>(img.width) * 3;
  while (cinfo.output_scanline < cinfo.output_height) {
    unsigned char* row = img.pixels.data() + cinfo.output_scanline * stride;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

FfmpegFrameSource::FfmpegFrameSource(DecoderConfig config)
    : config_(std::move(config)),
      resolved_path_(find_executable(config_.path)),
      slots_(std::clamp(config_.max_processes, 1, 256)) {}

std::vector<std::string> FfmpegFrameSource::argv_for(const VideoRef& video, double ts,
                                                     const Resolution& res) const {
  std::ostringstream t;
  t.precision(6);
  t << std::fixed << ts;
  const std::map<std::string, std::string> values{
      {"input", video.source_uri},
      {"ts", t.str()},
      {"width", std::to_string(res.width)},
      {"height", std::to_string(res.height)},
      {"filter", letterbox_filter(res.width, res.height)}};
  std::vector<std::string> argv{resolved_path_};
  for (const auto& a : config_.args) argv.push_back(prompts::fill(a, values));
  return argv;
}

std::vector<EncodedFrame> FfmpegFrameSource::extract(const VideoRef& video,
                                                     const SamplingPlan& plan) {
  if (plan.timestamps.empty()) throw Error(ErrorKind::InvalidInput, "plan has no frames");
  if (resolved_path_.empty()) {
    throw Error(ErrorKind::Environment,
                "video decoder '" + config_.path +
                    "' not found; install ffmpeg (e.g. `apt install ffmpeg` or "
                    "`pip install imageio-ffmpeg`) or set decoder.path in the config");
  }
  if (::access(video.source_uri.c_str(), R_OK) != 0 &&
      video.source_uri.find("://") == std::string::npos) {
    throw Error(ErrorKind::Extraction, "video '" + video.source_uri + "' is not readable");
  }

  slots_.acquire();
  struct Release {
    std::counting_semaphore<256>& s;
    ~Release() { s.release(); }
  } release{slots_};

  std::vector<EncodedFrame> frames;
  for (double ts : plan.timestamps) {
    try {
      const auto res = run_process(argv_for(video, ts, plan.resolution));
      if (res.exit_code != 0 || res.out.empty()) {
        throw Error(ErrorKind::Extraction, "decoder produced no frame");
      }
      const auto img = parse_ppm(res.out);
      frames.push_back(EncodedFrame{"jpeg", img.width, img.height, ts,
                                    encode_jpeg(img, config_.jpeg_quality)});
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Environment) throw;
      spdlog::warn("skipping frame at {:.3f}s of '{}': {}", ts, video.source_uri, e.what());
    }
  }
  if (frames.size() * 2 < plan.timestamps.size()) {
    throw Error(ErrorKind::Extraction, "only " + std::to_string(frames.size()) + " of " +
                                           std::to_string(plan.timestamps.size()) +
                                           " frames decoded from '" + video.source_uri + "'");
  }
  return frames;
}

DispatchFrameSource::DispatchFrameSource(std::shared_ptr<FrameSource> files)
    : files_(std::move(files)) {}

std::vector<EncodedFrame> DispatchFrameSource::extract(const VideoRef& video,
                                                       const SamplingPlan& plan) {
  if (is_simulated(video)) return null_.extract(video, plan);
  if (!files_) throw Error(ErrorKind::Config, "no frame source configured for real videos");
  return files_->extract(video, plan);
}

VideoRef probe_video(const std::string& path, const DecoderConfig& decoder) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorKind::Extraction, "video file not found: " + path);
  }
  const auto exe = find_executable(decoder.path);
  if (exe.empty()) {
    throw Error(ErrorKind::Environment,
                "video decoder '" + decoder.path + "' not found; install ffmpeg or set decoder.path");
  }
  const auto res = run_process({exe, "-hide_banner", "-i", path}, true);
  static const std::regex duration_re(R"(Duration:\s*(\d+):(\d+):(\d+(?:\.\d+)?))");
  static const std::regex size_re(R"(Video:.*?,\s*(\d{2,5})x(\d{2,5}))");
  static const std::regex fps_re(R"(([\d.]+)\s*fps)");
  std::smatch m;
  if (!std::regex_search(res.out, m, duration_re)) {
    throw Error(ErrorKind::Extraction, "cannot read duration of '" + path + "'");
  }
  VideoRef v;
  v.video_id = std::filesystem::path(path).stem().string();
  v.source_uri = path;
  v.duration_s = std::stod(m[1]) * 3600.0 + std::stod(m[2]) * 60.0 + std::stod(m[3]);
  if (std::regex_search(res.out, m, size_re)) {
    v.width = std::stoi(m[1]);
    v.height = std::stoi(m[2]);
  }
  if (std::regex_search(res.out, m, fps_re)) v.native_fps = std::stod(m[1]);
  v.validate();
  return v;
}

}  // namespace vas
