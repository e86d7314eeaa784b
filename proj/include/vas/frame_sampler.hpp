#pragma once

#include <map>
#include <memory>
#include <semaphore>
#include <string>
#include <vector>

#include "vas/core.hpp"
#include "vas/gateway.hpp"

namespace vas {

struct Resolution {
  int width = 0;
  int height = 0;
  long area() const { return static_cast<long>(width) * height; }
  friend bool operator==(const Resolution&, const Resolution&) = default;
};

struct LevelSampling {
  int frame_count = 0;
  Resolution resolution;
};

/// Frame count and resolution per clip level. Deeper levels get fewer frames
/// at higher resolution.
struct ZoomSchedule {
  std::map<int, LevelSampling> levels;
  LevelSampling caption_pass;

  static ZoomSchedule defaults();
  /// Throws Config unless frame counts strictly decrease and pixel areas
  /// strictly increase with level.
  void validate() const;
  const LevelSampling& at(int level) const;
};

struct SamplingPlan {
  int frame_count = 0;
  Resolution resolution;
  std::vector<double> timestamps;
};

/// Midpoint-rule timestamps start + (k + 0.5) * duration / n. When
/// `native_fps` > 0 the count is capped at floor(duration * native_fps).
SamplingPlan plan_window(const TemporalWindow& window, const LevelSampling& sampling,
                         double native_fps = 0.0);
SamplingPlan plan(const ClipRef& clip, const ZoomSchedule& schedule, double native_fps = 0.0);

/// Turns a sampling plan into encoded frames.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::vector<EncodedFrame> extract(const VideoRef& video, const SamplingPlan& plan) = 0;
};

/// Scheme used by simulated videos; such videos have no pixels.
inline constexpr std::string_view kSimScheme = "sim://";

bool is_simulated(const VideoRef& video);

/// Frames without pixels, format "null". The payload holds the source URI so
/// frames of different videos stay distinguishable.
class NullFrameSource final : public FrameSource {
 public:
  std::vector<EncodedFrame> extract(const VideoRef& video, const SamplingPlan& plan) override;
};

struct DecoderConfig {
  /// Executable; resolved through PATH when not absolute.
  std::string path = "ffmpeg";
  /// Argument template. Placeholders: {input} {ts} {width} {height} {filter}.
  std::vector<std::string> args = {"-v", "error", "-ss", "{ts}", "-i", "{input}", "-frames:v",
                                   "1", "-vf", "{filter}", "-f", "image2pipe", "-vcodec", "ppm",
                                   "-"};
  int max_processes = 2;
  int jpeg_quality = 85;
};

/// Scale-then-pad filter that letterboxes a frame into width x height.
std::string letterbox_filter(int width, int height);

/// Grabs one frame per timestamp through an external decoder writing PPM to
/// stdout, then re-encodes each frame as JPEG.
///
/// A failed timestamp is skipped with a warning as long as at least half the
/// frames decode; otherwise extraction fails. A missing decoder raises
/// Environment.
class FfmpegFrameSource final : public FrameSource {
 public:
  explicit FfmpegFrameSource(DecoderConfig config = {});
  std::vector<EncodedFrame> extract(const VideoRef& video, const SamplingPlan& plan) override;

 private:
  std::vector<std::string> argv_for(const VideoRef& video, double ts, const Resolution& res) const;

  DecoderConfig config_;
  std::string resolved_path_;
  std::counting_semaphore<256> slots_;
};

/// Uses NullFrameSource for simulated videos and `files` otherwise.
class DispatchFrameSource final : public FrameSource {
 public:
  explicit DispatchFrameSource(std::shared_ptr<FrameSource> files);
  std::vector<EncodedFrame> extract(const VideoRef& video, const SamplingPlan& plan) override;

 private:
  NullFrameSource null_;
  std::shared_ptr<FrameSource> files_;
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> pixels;  // row-major RGB
};

/// Parses a binary (P6) PPM image.
RgbImage parse_ppm(std::string_view data);
std::string encode_jpeg(const RgbImage& image, int quality);
RgbImage decode_jpeg(std::string_view data);

/// Searches PATH for an executable; returns an empty string when absent.
std::string find_executable(const std::string& name);

struct ProcessOutput {
  int exit_code = -1;
  std::string out;
};

/// Runs argv[0] with the given arguments and captures stdout, plus stderr
/// when `merge_stderr` is set.
ProcessOutput run_process(const std::vector<std::string>& argv, bool merge_stderr = false);

/// Reads duration, frame size and frame rate from the decoder's banner.
/// Throws Extraction when the file cannot be opened.
VideoRef probe_video(const std::string& path, const DecoderConfig& decoder = {});

}  // namespace vas
