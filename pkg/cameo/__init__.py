# CameoScan - detection of answer harvesting with multiple accounts