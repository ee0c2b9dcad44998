#pragma once

#include "qdtk/errors.hpp"
#include "qdtk/farfield/collection.hpp"
#include "qdtk/farfield/io.hpp"
#include "qdtk/imaging/campaign.hpp"
#include "qdtk/imaging/image.hpp"
#include "qdtk/imaging/io.hpp"
#include "qdtk/imaging/psf.hpp"
#include "qdtk/imaging/synth.hpp"
#include "qdtk/imaging/meta_io.hpp"
#include "qdtk/localization/cross_section.hpp"
#include "qdtk/localization/pipeline.hpp"
#include "qdtk/localization/records_io.hpp"
#include "qdtk/localization/scale.hpp"
#include "qdtk/localization/section_fit.hpp"
#include "qdtk/metrics/arrhenius.hpp"
#include "qdtk/metrics/efficiency.hpp"
#include "qdtk/metrics/spectra.hpp"
#include "qdtk/numerics/least_squares.hpp"
#include "qdtk/numerics/stats.hpp"
#include "qdtk/parallel.hpp"
#include "qdtk/photon/g2.hpp"
#include "qdtk/photon/histogram.hpp"
#include "qdtk/photon/hom.hpp"
#include "qdtk/photon/io.hpp"
#include "qdtk/photon/lifetime.hpp"
#include "qdtk/photon/presets.hpp"
#include "qdtk/photon/raw.hpp"
#include "qdtk/photon/synth.hpp"
#include "qdtk/report/dossier.hpp"
#include "qdtk/report/monte_carlo.hpp"
#include "qdtk/report/reproductions.hpp"
