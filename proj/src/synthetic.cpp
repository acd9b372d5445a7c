// Copyright (C) 2026 The EchoGuide Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoguide/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <opencv2/imgproc.hpp>

#include "echoguide/error.hpp"
#include "echoguide/video_io.hpp"

namespace echoguide::synthetic {

namespace fs = std::filesystem;
using landmarks::LandmarkId;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct LvGeometry {
    double cx, cy;  // ellipse centre
    double a, b;    // horizontal / vertical semi-axes
    double background;
    double outline;
};

LvGeometry draw_geometry(std::mt19937_64& rng, cv::Size size) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double w = size.width;
    const double h = size.height;
    LvGeometry g;
    g.cx = w * (0.42 + 0.16 * u(rng));
    g.cy = h * (0.38 + 0.10 * u(rng));
    g.a = w * (0.12 + 0.06 * u(rng));
    g.b = h * (0.22 + 0.06 * u(rng));
    g.background = 20.0;
    g.outline = 210.0;
    return g;
}

struct AuxSpec {
    LandmarkId id;
    double intensity;
};

constexpr AuxSpec kAux[] = {{landmarks::kRV, 120.0}, {landmarks::kRA, 145.0}, {landmarks::kLA, 170.0},
                            {landmarks::kTV, 190.0}, {landmarks::kTVA, 235.0}};

cv::Point2d aux_position(LandmarkId id, const LvGeometry& g, cv::Size size) {
    const double w = size.width;
    const double h = size.height;
    switch (id) {
        case landmarks::kRV: return {g.cx - g.a - 0.12 * w, g.cy - 0.08 * h};
        case landmarks::kRA: return {g.cx - g.a - 0.10 * w, g.cy + g.b + 0.06 * h};
        case landmarks::kLA: return {g.cx, g.cy + g.b + 0.12 * h};
        case landmarks::kTV: return {g.cx - g.a - 0.04 * w, g.cy + 0.9 * g.b};
        case landmarks::kTVA: return {g.cx - g.a - 0.14 * w, g.cy + 0.9 * g.b};
        default: return {0.0, 0.0};
    }
}

LandmarkFrame render_landmark_frame(const LvGeometry& g, cv::Size size, std::mt19937_64& rng) {
    LandmarkFrame out;
    cv::Mat img(size, CV_32FC1);
    std::normal_distribution<float> noise(0.0f, 6.0f);
    for (int y = 0; y < size.height; ++y) {
        for (int x = 0; x < size.width; ++x) img.at<float>(y, x) = static_cast<float>(g.background) + noise(rng);
    }
    cv::ellipse(img, cv::Point(static_cast<int>(std::lround(g.cx)), static_cast<int>(std::lround(g.cy))),
                cv::Size(static_cast<int>(std::lround(g.a)), static_cast<int>(std::lround(g.b))), 0.0, 0.0, 360.0,
                cv::Scalar(g.outline), 1, cv::LINE_8);

    auto& pts = out.annotation.points;
    pts[landmarks::kApex] = {g.cx, g.cy - g.b, 1, true};
    pts[landmarks::kMitralValve] = {g.cx, g.cy + g.b, 1, true};
    for (int k = 1; k <= 20; ++k) {
        const double y = g.cy - g.b + 2.0 * g.b * static_cast<double>(k) / 21.0;
        const double t = (y - g.cy) / g.b;
        const double dx = g.a * std::sqrt(std::max(0.0, 1.0 - t * t));
        pts[2 * k] = {g.cx - dx, y, 1, true};
        pts[2 * k + 1] = {g.cx + dx, y, 1, true};
    }
    std::uniform_int_distribution<int> vis(1, 3);
    for (const auto& aux : kAux) {
        const auto p = aux_position(aux.id, g, size);
        cv::circle(img, cv::Point(static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y))), 2,
                   cv::Scalar(aux.intensity), cv::FILLED, cv::LINE_8);
        pts[aux.id] = {p.x, p.y, vis(rng), true};
    }
    img.convertTo(out.image, CV_8UC1);
    return out;
}

std::string clip_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "clip_%04zu", i);
    return buf;
}

}  // namespace

LandmarkFrame make_landmark_frame(std::mt19937_64& rng, cv::Size size) {
    return render_landmark_frame(draw_geometry(rng, size), size, rng);
}

std::vector<cv::Vec4d> tracing_rows(const ingest::LandmarkAnnotation& annotation) {
    std::vector<cv::Vec4d> rows;
    for (int r = 0; r < landmarks::kNumContour / 2; ++r) {
        const auto& p = annotation.points.at(2 * r);
        const auto& q = annotation.points.at(2 * r + 1);
        rows.emplace_back(p.x, p.y, q.x, q.y);
    }
    return rows;
}

cv::Mat make_pose_frame(PoseCategory category, std::mt19937_64& rng, cv::Size size) {
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    std::normal_distribution<double> noise(0.0, 10.0);
    const double px = phase(rng);
    const double py = phase(rng);
    constexpr double kPeriod = 8.0;
    cv::Mat img(size, CV_8UC1);
    for (int y = 0; y < size.height; ++y) {
        for (int x = 0; x < size.width; ++x) {
            const double sx = std::sin(2.0 * kPi * x / kPeriod + px);
            const double sy = std::sin(2.0 * kPi * y / kPeriod + py);
            double pattern = 0.0;
            switch (category) {
                case PoseCategory::green: pattern = sy; break;
                case PoseCategory::yellow: pattern = sx; break;
                case PoseCategory::red: pattern = (sx * sy >= 0.0) ? 1.0 : -1.0; break;
            }
            img.at<std::uint8_t>(y, x) = cv::saturate_cast<std::uint8_t>(128.0 + 60.0 * pattern + noise(rng));
        }
    }
    return img;
}

double ef_to_intensity(double ef) { return 30.0 + 2.0 * std::clamp(ef, 0.0, 100.0); }

std::vector<cv::Mat> make_ef_clip(double ef, std::size_t frames, cv::Size size, std::mt19937_64& rng) {
    std::normal_distribution<double> noise(0.0, 4.0);
    const double level = ef_to_intensity(ef);
    std::vector<cv::Mat> clip;
    for (std::size_t f = 0; f < frames; ++f) {
        cv::Mat img(size, CV_8UC1);
        for (int y = 0; y < size.height; ++y) {
            for (int x = 0; x < size.width; ++x) {
                img.at<std::uint8_t>(y, x) = cv::saturate_cast<std::uint8_t>(level + noise(rng));
            }
        }
        const double radius = std::min(size.width, size.height) * (0.15 + 0.05 * std::sin(2.0 * kPi * f / 20.0));
        cv::circle(img, cv::Point(size.width / 2, size.height / 2), static_cast<int>(std::lround(radius)),
                   cv::Scalar(std::min(255.0, level + 20.0)), cv::FILLED);
        clip.push_back(std::move(img));
    }
    return clip;
}

std::vector<PoseCategory> make_sweep_labels(std::size_t frames, std::mt19937_64& rng) {
    if (frames < 3) throw PreconditionError("a sweep needs at least 3 frames");
    std::uniform_int_distribution<std::size_t> len(std::max<std::size_t>(1, frames / 5),
                                                   std::max<std::size_t>(1, 2 * frames / 5));
    const std::size_t green = len(rng);
    const std::size_t yellow = std::min(len(rng), frames - green - 1);
    std::vector<PoseCategory> labels(frames, PoseCategory::red);
    std::fill_n(labels.begin(), green, PoseCategory::green);
    std::fill_n(labels.begin() + static_cast<std::ptrdiff_t>(green), yellow, PoseCategory::yellow);
    return labels;
}

std::vector<rubric::Criterion> deductions_for(PoseCategory category, std::mt19937_64& rng) {
    using rubric::Criterion;
    std::uniform_int_distribution<int> pick(0, 2);
    const int k = pick(rng);
    switch (category) {
        case PoseCategory::green:
            if (k == 0) return {};
            if (k == 1) return {Criterion::RV_FREE_WALL_NOT_VISIBLE};
            return {Criterion::OTHER_SIGNAL_DROPOUT};
        case PoseCategory::yellow:
            if (k == 0) return {Criterion::LV_FREE_WALL_NOT_VISIBLE};
            if (k == 1) return {Criterion::LA_PARTIALLY_OUT};
            return {Criterion::RV_FREE_WALL_NOT_VISIBLE, Criterion::RA_NOT_VISIBLE};
        case PoseCategory::red:
            if (k == 0) return {Criterion::LA_ENTIRELY_OUT};
            if (k == 1) return {Criterion::LV_FREE_WALL_NOT_VISIBLE, Criterion::AORTA_VISIBLE_5CH};
            return {Criterion::LA_PARTIALLY_OUT, Criterion::AORTA_VISIBLE_5CH};
    }
    return {};
}

void write_corpus(const fs::path& root, const CorpusOptions& options) {
    fs::create_directories(root / "Videos");
    fs::create_directories(root / "sweeps");
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    std::ofstream files(root / "FileList.csv");
    std::ofstream tracings(root / "VolumeTracings.csv");
    std::ofstream aux(root / "AuxLandmarks.csv");
    files << "FileName,EF,ESV,EDV,FrameHeight,FrameWidth,FPS,NumberOfFrames,Split\n";
    tracings << "FileName,X1,Y1,X2,Y2,Frame\n";
    aux << "FileName,Frame,Landmark,X,Y,Visibility\n";
    files.precision(17);
    tracings.precision(17);
    aux.precision(17);

    const auto size = options.frame_size;
    for (std::size_t c = 0; c < options.clips; ++c) {
        const auto name = clip_name(c);
        const double ef = 20.0 + 60.0 * u(rng);
        const auto base = draw_geometry(rng, size);
        const std::size_t traced[2] = {0, options.frames_per_clip / 2};

        std::vector<cv::Mat> frames;
        for (std::size_t f = 0; f < options.frames_per_clip; ++f) {
            LvGeometry g = base;
            g.b = base.b * (1.0 - 0.1 * std::sin(2.0 * kPi * static_cast<double>(f) / 20.0));
            g.background = 0.4 * ef_to_intensity(ef);
            auto frame = render_landmark_frame(g, size, rng);
            for (auto t : traced) {
                if (t != f) continue;
                for (const auto& row : tracing_rows(frame.annotation)) {
                    tracings << name << ".avi," << row[0] << ',' << row[1] << ',' << row[2] << ',' << row[3]
                             << ',' << f << '\n';
                }
                for (const auto& a : kAux) {
                    const auto& p = frame.annotation.points.at(a.id);
                    aux << name << ".avi," << f << ',' << landmarks::landmark_name(a.id) << ',' << p.x << ','
                        << p.y << ',' << p.visibility << '\n';
                }
            }
            frames.push_back(std::move(frame.image));
        }
        video::write_frames(root / "Videos" / (name + ".avi"), frames, 50.0);
        const char* split = (c % 10 == 8) ? "VAL" : (c % 10 == 9) ? "TEST" : "TRAIN";
        files << name << ',' << ef << ",0,0," << size.height << ',' << size.width << ",50,"
              << options.frames_per_clip << ',' << split << '\n';
    }

    std::vector<ingest::SweepRecording> sweeps;
    const char* devices[2] = {"Clarius PAL HD3", "Philips Lumify"};
    for (std::size_t s = 0; s < options.subjects; ++s) {
        char subject[32];
        std::snprintf(subject, sizeof(subject), "subject_%02zu", s);
        for (std::size_t k = 0; k < options.sweeps_per_subject; ++k) {
            ingest::SweepRecording sweep;
            sweep.subject_id = subject;
            sweep.sweep_id = std::string(subject) + "_sweep_" + std::to_string(k);
            sweep.device = devices[(s + k) % 2];
            sweep.fps = options.sweep_fps;
            sweep.video_path = root / "sweeps" / (sweep.sweep_id + ".avi");
            sweep.frame_categories = make_sweep_labels(options.frames_per_sweep, rng);
            std::vector<std::vector<rubric::Criterion>> ded;
            std::vector<cv::Mat> frames;
            const auto geometry = draw_geometry(rng, size);
            for (auto cat : sweep.frame_categories) {
                ded.push_back(deductions_for(cat, rng));
                auto anatomy = render_landmark_frame(geometry, size, rng).image;
                cv::Mat texture = make_pose_frame(cat, rng, size);
                cv::Mat blended;
                cv::addWeighted(anatomy, 0.5, texture, 0.5, 0.0, blended);
                frames.push_back(std::move(blended));
            }
            sweep.frame_deductions = std::move(ded);
            video::write_frames(sweep.video_path, frames, sweep.fps);
            sweeps.push_back(std::move(sweep));
        }
    }
    std::ofstream manifest(root / "sweeps" / "manifest.json");
    manifest << ingest::serialize_sweep_manifest(sweeps, root / "sweeps") << '\n';
}

}  // namespace echoguide::synthetic
